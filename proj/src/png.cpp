#include <zlib.h>

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "racer/camera.hpp"

namespace racer {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(v >> 24);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back(v & 0xff);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32(out, static_cast<uint32_t>(crc));
}

}  // namespace

void write_png(const std::string& path, const ImageObs& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_png: channels must be 1 or 3");

  // filter byte 0 + 8-bit samples per scanline
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height) * (1 + img.width * img.channels));
  for (int r = 0; r < img.height; ++r) {
    raw.push_back(0);
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < img.channels; ++ch) {
        float v = img.at(r, c, ch);
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        raw.push_back(static_cast<uint8_t>(v * 255.0f + 0.5f));
      }
    }
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("write_png: zlib compression failed");
  comp.resize(comp_len);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.width));
  put_u32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                               // bit depth
  ihdr.push_back(img.channels == 3 ? 2 : 0);       // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", comp);
  put_chunk(out, "IEND", {});

  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("write_png: cannot open " + path);
  size_t written = std::fwrite(out.data(), 1, out.size(), f);
  std::fclose(f);
  if (written != out.size())
    throw std::runtime_error("write_png: short write to " + path);
}

}  // namespace racer
