#pragma once

// Checkpoint file layout (all integers and reals little-endian):
//
//   bytes 0..3   magic "VTH1"
//   5 x u32      patch size, input channels, filters, kernel size, hidden units
//   u64          parameter count
//   N x f64      parameters: conv1 weights (out, in, ky, kx), conv1 biases,
//                conv2 weights, conv2 biases, fc1 weights (row-major 100x800),
//                fc1 biases, fc2 weights, fc2 bias, a = log(alpha)
//   u64          metadata length in bytes
//   ...          metadata as UTF-8 JSON (training config, seed)

#include <filesystem>
#include <string>

#include <json.hpp>

#include "vth/pnet.hpp"

namespace vth {

struct Checkpoint {
  PNetParams params;
  nlohmann::json meta;
};

void save_checkpoint(const PNetParams& params, const nlohmann::json& meta, const std::filesystem::path& path);

// Throws DataError on a bad magic, an unsupported version, an architecture
// mismatch, or a size mismatch (truncated or trailing bytes).
Checkpoint read_checkpoint(const std::filesystem::path& path);

inline PNetParams load_checkpoint(const std::filesystem::path& path) { return read_checkpoint(path).params; }

// 16-hex-digit FNV-1a hash of the serialized parameter block.
std::string params_fingerprint(const PNetParams& params);

}  // namespace vth
