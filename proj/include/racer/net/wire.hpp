#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "racer/rl/replay.hpp"

namespace racer::net {

constexpr uint32_t kProtocolVersion = 1;
constexpr size_t kFrameHeader = 5;      // type byte + protocol version
constexpr size_t kMaxFrameBytes = 256u << 20;

enum class MsgType : uint8_t {
  HELLO = 1,
  SNAPSHOT = 2,
  TRANSITIONS = 3,
  EVAL_RESULT = 4,
  CONFIG = 5,
  HEARTBEAT = 6,
  SHUTDOWN = 7,
  ERROR = 8,  // connection-level error report, never fatal to the peer
};

bool known_type(uint8_t t);

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WireMessage {
  MsgType type = MsgType::HEARTBEAT;
  uint32_t version = kProtocolVersion;
  std::vector<uint8_t> payload;

  bool operator==(const WireMessage& o) const {
    return type == o.type && version == o.version && payload == o.payload;
  }
};

/// Frame layout: u32 LE total length (header + payload), u8 type,
/// u32 LE protocol version, payload bytes.
std::vector<uint8_t> encode_frame(const WireMessage& msg);

/// Decodes one frame from the front of `bytes`. Returns false when the
/// buffer does not yet hold a complete frame; throws WireError on a
/// malformed or oversized frame or an unknown type tag.
bool decode_frame(const std::vector<uint8_t>& bytes, WireMessage* out,
                  size_t* consumed);

// ---- typed payloads ------------------------------------------------------

enum class WorkerRole : uint8_t { collector = 0, evaluator = 1 };
enum class StepMode : uint8_t { sync = 0, async = 1 };

struct HelloMsg {
  WorkerRole role = WorkerRole::collector;
  StepMode mode = StepMode::sync;
  uint64_t seed = 0;
  std::string scenario;
};

struct SnapshotMsg {
  uint64_t version = 0;
  std::vector<uint8_t> params;  // serialized parameter blob
};

/// Stream of raw steps plus episode-boundary markers, in worker order.
struct TransitionsMsg {
  struct Record {
    bool end_of_episode = false;
    bool terminal = false;        // only meaningful on an end marker
    rl::Step step;                // on end markers only step.obs is used
  };
  uint32_t worker_id = 0;
  std::vector<Record> records;
};

struct EvalResultMsg {
  uint32_t worker_id = 0;
  uint64_t snapshot_version = 0;
  uint32_t episodes = 0;
  double mean_progress = 0.0;     // meters of course progress per episode
  double completion_rate = 0.0;   // fraction of episodes with >= 1 full lap
  std::vector<double> lap_times;
};

struct ConfigMsg {
  std::string text;  // key = value lines
};

struct ErrorMsg {
  std::string what;
};

WireMessage encode_hello(const HelloMsg& m);
WireMessage encode_snapshot(const SnapshotMsg& m);
WireMessage encode_transitions(const TransitionsMsg& m);
WireMessage encode_eval_result(const EvalResultMsg& m);
WireMessage encode_config(const ConfigMsg& m);
WireMessage encode_error(const ErrorMsg& m);
WireMessage encode_heartbeat();
WireMessage encode_shutdown();

HelloMsg decode_hello(const WireMessage& msg);
SnapshotMsg decode_snapshot(const WireMessage& msg);
TransitionsMsg decode_transitions(const WireMessage& msg);
EvalResultMsg decode_eval_result(const WireMessage& msg);
ConfigMsg decode_config(const WireMessage& msg);
ErrorMsg decode_error(const WireMessage& msg);

/// Parses "key = value" lines (# comments, blank lines ignored) into an
/// ordered key/value list; later duplicates win on lookup.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> items;

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
};

KeyValues parse_key_values(const std::string& text);

}  // namespace racer::net
