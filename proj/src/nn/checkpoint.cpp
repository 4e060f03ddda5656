#include "racer/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace racer::nn {

namespace {

constexpr char kMagic[4] = {'R', 'N', 'E', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xff);
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xff);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size())
      throw std::runtime_error("checkpoint: truncated data");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(&buf[pos]), n);
    pos += n;
    return s;
  }
};

}  // namespace

uint64_t arch_hash(const std::string& description) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : description) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string describe(const ActorArch& a) {
  std::ostringstream os;
  os << "actor:hw" << a.image_hw << ":c" << a.image_c << ":conv";
  for (int c : a.conv_channels) os << "," << c;
  os << ":embed" << a.embed << ":p" << a.proprio << ":trunk" << a.trunk_width
     << "x" << a.trunk_depth << ":head" << a.head << ":img" << a.use_image;
  return os.str();
}

std::string describe(const CriticArch& a) {
  std::ostringstream os;
  os << "critic:in" << a.input_dim << ":w" << a.width << "x" << a.depth
     << ":K" << a.quantiles << ":img" << a.use_image;
  if (a.use_image) {
    os << ":hw" << a.image_hw << ":conv";
    for (int c : a.conv_channels) os << "," << c;
    os << ":embed" << a.embed;
  }
  return os.str();
}

std::vector<uint8_t> serialize_params(
    uint64_t hash, const std::vector<Param<float>*>& params) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u64(out, hash);
  put_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(out, static_cast<uint32_t>(p->name.size()));
    out.insert(out.end(), p->name.begin(), p->name.end());
    put_u32(out, static_cast<uint32_t>(p->value.shape.size()));
    for (int d : p->value.shape) put_u32(out, static_cast<uint32_t>(d));
    size_t start = out.size();
    out.resize(start + p->value.numel() * 4);
    static_assert(sizeof(float) == 4);
    std::memcpy(&out[start], p->value.data.data(), p->value.numel() * 4);
  }
  return out;
}

void deserialize_params(const std::vector<uint8_t>& bytes, uint64_t hash,
                        const std::vector<Param<float>*>& params) {
  Reader r{bytes};
  if (r.str(4) != std::string(kMagic, 4))
    throw std::runtime_error("checkpoint: bad magic");
  if (r.u32() != kVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  if (r.u64() != hash)
    throw std::runtime_error("checkpoint: architecture hash mismatch");
  uint32_t count = r.u32();
  if (count != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (auto* p : params) {
    uint32_t name_len = r.u32();
    if (r.str(name_len) != p->name)
      throw std::runtime_error("checkpoint: parameter name mismatch");
    uint32_t rank = r.u32();
    if (rank != p->value.shape.size())
      throw std::runtime_error("checkpoint: rank mismatch for " + p->name);
    for (int d : p->value.shape)
      if (r.u32() != static_cast<uint32_t>(d))
        throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
    r.need(p->value.numel() * 4);
    std::memcpy(p->value.data.data(), &bytes[r.pos], p->value.numel() * 4);
    r.pos += p->value.numel() * 4;
  }
  if (r.pos != bytes.size())
    throw std::runtime_error("checkpoint: trailing data");
}

void save_checkpoint(const std::string& path, uint64_t hash,
                     const std::vector<Param<float>*>& params) {
  std::vector<uint8_t> bytes = serialize_params(hash, params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, uint64_t hash,
                     const std::vector<Param<float>*>& params) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::vector<uint8_t> bytes(static_cast<size_t>(f.tellg()));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: read failed for " + path);
  deserialize_params(bytes, hash, params);
}

}  // namespace racer::nn
