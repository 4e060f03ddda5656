#include "racer/net/wire.hpp"

#include <cstring>
#include <sstream>

namespace racer::net {

namespace {

struct Writer {
  std::vector<uint8_t> out;

  void u8(uint8_t v) { out.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back((v >> (8 * i)) & 0xFF);
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const uint8_t* p, size_t n) { out.insert(out.end(), p, p + n); }
  void blob(const std::vector<uint8_t>& b) {
    u32(static_cast<uint32_t>(b.size()));
    bytes(b.data(), b.size());
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  }
  void floats(const std::vector<float>& v) {
    u32(static_cast<uint32_t>(v.size()));
    for (float x : v) f32(x);
  }
  void doubles(const std::vector<double>& v) {
    u32(static_cast<uint32_t>(v.size()));
    for (double x : v) f64(x);
  }
};

struct Reader {
  const uint8_t* p;
  size_t n;
  size_t pos = 0;

  void need(size_t k) const {
    if (pos + k > n) throw WireError("payload truncated");
  }
  uint8_t u8() {
    need(1);
    return p[pos++];
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos++]) << (8 * i);
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::vector<uint8_t> blob() {
    uint32_t k = u32();
    need(k);
    std::vector<uint8_t> b(p + pos, p + pos + k);
    pos += k;
    return b;
  }
  std::string str() {
    uint32_t k = u32();
    need(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
  std::vector<float> floats() {
    uint32_t k = u32();
    need(static_cast<size_t>(k) * 4);
    std::vector<float> v(k);
    for (uint32_t i = 0; i < k; ++i) v[i] = f32();
    return v;
  }
  std::vector<double> doubles() {
    uint32_t k = u32();
    need(static_cast<size_t>(k) * 8);
    std::vector<double> v(k);
    for (uint32_t i = 0; i < k; ++i) v[i] = f64();
    return v;
  }
  void done() const {
    if (pos != n) throw WireError("trailing bytes in payload");
  }
};

Reader reader_for(const WireMessage& msg, MsgType expect) {
  if (msg.type != expect) throw WireError("unexpected message type");
  if (msg.version != kProtocolVersion)
    throw WireError("unsupported protocol version");
  return Reader{msg.payload.data(), msg.payload.size()};
}

void put_obs(Writer& w, const rl::StoredObs& o) {
  w.floats(o.proprio);
  w.floats(o.global_obs);
  w.blob(o.image);
}

rl::StoredObs get_obs(Reader& r) {
  rl::StoredObs o;
  o.proprio = r.floats();
  o.global_obs = r.floats();
  o.image = r.blob();
  return o;
}

WireMessage with_payload(MsgType t, Writer&& w) {
  WireMessage m;
  m.type = t;
  m.payload = std::move(w.out);
  return m;
}

}  // namespace

bool known_type(uint8_t t) {
  return t >= static_cast<uint8_t>(MsgType::HELLO) &&
         t <= static_cast<uint8_t>(MsgType::ERROR);
}

std::vector<uint8_t> encode_frame(const WireMessage& msg) {
  if (msg.payload.size() > kMaxFrameBytes) throw WireError("frame too large");
  Writer w;
  w.u32(static_cast<uint32_t>(kFrameHeader + msg.payload.size()));
  w.u8(static_cast<uint8_t>(msg.type));
  w.u32(msg.version);
  w.bytes(msg.payload.data(), msg.payload.size());
  return std::move(w.out);
}

bool decode_frame(const std::vector<uint8_t>& bytes, WireMessage* out,
                  size_t* consumed) {
  if (bytes.size() < 4) return false;
  Reader r{bytes.data(), bytes.size()};
  uint32_t total = r.u32();
  if (total < kFrameHeader) throw WireError("frame length below header size");
  if (total > kMaxFrameBytes) throw WireError("frame too large");
  if (bytes.size() < 4 + static_cast<size_t>(total)) return false;
  uint8_t tag = r.u8();
  if (!known_type(tag)) throw WireError("unknown message type tag");
  out->type = static_cast<MsgType>(tag);
  out->version = r.u32();
  out->payload.assign(bytes.begin() + 9, bytes.begin() + 4 + total);
  *consumed = 4 + static_cast<size_t>(total);
  return true;
}

WireMessage encode_hello(const HelloMsg& m) {
  Writer w;
  w.u8(static_cast<uint8_t>(m.role));
  w.u8(static_cast<uint8_t>(m.mode));
  w.u64(m.seed);
  w.str(m.scenario);
  return with_payload(MsgType::HELLO, std::move(w));
}

HelloMsg decode_hello(const WireMessage& msg) {
  Reader r = reader_for(msg, MsgType::HELLO);
  HelloMsg m;
  uint8_t role = r.u8(), mode = r.u8();
  if (role > 1) throw WireError("bad worker role");
  if (mode > 1) throw WireError("bad step mode");
  m.role = static_cast<WorkerRole>(role);
  m.mode = static_cast<StepMode>(mode);
  m.seed = r.u64();
  m.scenario = r.str();
  r.done();
  return m;
}

WireMessage encode_snapshot(const SnapshotMsg& m) {
  Writer w;
  w.u64(m.version);
  w.blob(m.params);
  return with_payload(MsgType::SNAPSHOT, std::move(w));
}

SnapshotMsg decode_snapshot(const WireMessage& msg) {
  Reader r = reader_for(msg, MsgType::SNAPSHOT);
  SnapshotMsg m;
  m.version = r.u64();
  m.params = r.blob();
  r.done();
  return m;
}

WireMessage encode_transitions(const TransitionsMsg& m) {
  Writer w;
  w.u32(m.worker_id);
  w.u32(static_cast<uint32_t>(m.records.size()));
  for (const auto& rec : m.records) {
    w.u8(rec.end_of_episode ? 1 : 0);
    if (rec.end_of_episode) {
      w.u8(rec.terminal ? 1 : 0);
      put_obs(w, rec.step.obs);
    } else {
      put_obs(w, rec.step.obs);
      w.f32(rec.step.action[0]);
      w.f32(rec.step.action[1]);
      w.f32(rec.step.reward);
    }
  }
  return with_payload(MsgType::TRANSITIONS, std::move(w));
}

TransitionsMsg decode_transitions(const WireMessage& msg) {
  Reader r = reader_for(msg, MsgType::TRANSITIONS);
  TransitionsMsg m;
  m.worker_id = r.u32();
  uint32_t count = r.u32();
  m.records.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    TransitionsMsg::Record rec;
    rec.end_of_episode = r.u8() != 0;
    if (rec.end_of_episode) {
      rec.terminal = r.u8() != 0;
      rec.step.obs = get_obs(r);
    } else {
      rec.step.obs = get_obs(r);
      rec.step.action[0] = r.f32();
      rec.step.action[1] = r.f32();
      rec.step.reward = r.f32();
    }
    m.records.push_back(std::move(rec));
  }
  r.done();
  return m;
}

WireMessage encode_eval_result(const EvalResultMsg& m) {
  Writer w;
  w.u32(m.worker_id);
  w.u64(m.snapshot_version);
  w.u32(m.episodes);
  w.f64(m.mean_progress);
  w.f64(m.completion_rate);
  w.doubles(m.lap_times);
  return with_payload(MsgType::EVAL_RESULT, std::move(w));
}

EvalResultMsg decode_eval_result(const WireMessage& msg) {
  Reader r = reader_for(msg, MsgType::EVAL_RESULT);
  EvalResultMsg m;
  m.worker_id = r.u32();
  m.snapshot_version = r.u64();
  m.episodes = r.u32();
  m.mean_progress = r.f64();
  m.completion_rate = r.f64();
  m.lap_times = r.doubles();
  r.done();
  return m;
}

WireMessage encode_config(const ConfigMsg& m) {
  Writer w;
  w.str(m.text);
  return with_payload(MsgType::CONFIG, std::move(w));
}

ConfigMsg decode_config(const WireMessage& msg) {
  Reader r = reader_for(msg, MsgType::CONFIG);
  ConfigMsg m;
  m.text = r.str();
  r.done();
  return m;
}

WireMessage encode_error(const ErrorMsg& m) {
  Writer w;
  w.str(m.what);
  return with_payload(MsgType::ERROR, std::move(w));
}

ErrorMsg decode_error(const WireMessage& msg) {
  Reader r = reader_for(msg, MsgType::ERROR);
  ErrorMsg m;
  m.what = r.str();
  r.done();
  return m;
}

WireMessage encode_heartbeat() { return WireMessage{MsgType::HEARTBEAT}; }

WireMessage encode_shutdown() { return WireMessage{MsgType::SHUTDOWN}; }

bool KeyValues::has(const std::string& key) const {
  for (auto it = items.rbegin(); it != items.rend(); ++it)
    if (it->first == key) return true;
  return false;
}

std::string KeyValues::get(const std::string& key,
                           const std::string& fallback) const {
  for (auto it = items.rbegin(); it != items.rend(); ++it)
    if (it->first == key) return it->second;
  return fallback;
}

double KeyValues::get_num(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  try {
    return std::stod(get(key, ""));
  } catch (const std::exception&) {
    throw WireError("non-numeric value for key '" + key + "'");
  }
}

void KeyValues::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : items)
    if (k == key) {
      v = value;
      return;
    }
  items.push_back({key, value});
}

std::string KeyValues::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : items) os << k << " = " << v << "\n";
  return os.str();
}

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw WireError("config line without '=': " + t);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw WireError("config line with empty key");
    kv.items.push_back({key, value});
  }
  return kv;
}

}  // namespace racer::net
