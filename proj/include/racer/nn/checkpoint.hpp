#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "racer/nn/net.hpp"

namespace racer::nn {

/// FNV-1a over an architecture description string; stored in checkpoint
/// headers so loaders can reject mismatched shapes early.
uint64_t arch_hash(const std::string& description);

std::string describe(const ActorArch& a);
std::string describe(const CriticArch& a);

/// Versioned binary checkpoint: magic "RNET", format version, architecture
/// hash, then per-parameter name / shape / little-endian float32 data.
void save_checkpoint(const std::string& path, uint64_t hash,
                     const std::vector<Param<float>*>& params);

/// Loads into already-initialized parameters; throws on magic, version, hash,
/// name or shape mismatch.
void load_checkpoint(const std::string& path, uint64_t hash,
                     const std::vector<Param<float>*>& params);

/// In-memory serialization used by the network snapshot messages.
std::vector<uint8_t> serialize_params(uint64_t hash,
                                      const std::vector<Param<float>*>& params);
void deserialize_params(const std::vector<uint8_t>& bytes, uint64_t hash,
                        const std::vector<Param<float>*>& params);

}  // namespace racer::nn
