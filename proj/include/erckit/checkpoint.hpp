#pragma once

#include <string>

#include "erckit/layers.hpp"

namespace erc::nn {

// Checkpoint format: one JSON document
//   {"format": "erckit-checkpoint", "version": 1,
//    "params":  [{"name", "group", "shape": [r, c], "data": [...]}, ...],
//    "buffers": [{"name", "shape": [r, c], "data": [...]}, ...]}
// Numbers are serialized in shortest round-trip decimal form, so a 64-bit
// save/load cycle is lossless and byte-deterministic for fixed values.
std::string checkpoint_to_string(const ParamRegistry& reg);
void save_checkpoint(const ParamRegistry& reg, const std::string& path);

// Loads by name into an already-constructed registry. Every entry must match
// an existing parameter/buffer with the same shape and group, and every
// registry entry must be present in the file.
void load_checkpoint_string(ParamRegistry& reg, const std::string& content,
                            const std::string& origin);
void load_checkpoint(ParamRegistry& reg, const std::string& path);

// In-memory parameter + buffer snapshot (used for best-epoch restore).
struct ParamSnapshot {
  std::vector<Tensor> params;
  std::vector<Tensor> buffers;
};
ParamSnapshot snapshot(const ParamRegistry& reg);
void restore(ParamRegistry& reg, const ParamSnapshot& snap);

}  // namespace erc::nn
