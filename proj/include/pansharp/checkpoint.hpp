#pragma once

#include <string>

#include "pansharp/network.hpp"

namespace pansharp {

// Checkpoint container for trained network parameters:
//   bytes 0..3   magic "PPN1"
//   bytes 4..7   u32 little-endian byte length of the JSON header
//   header       UTF-8 JSON: kernel_size, feature_count, ms_bands,
//                prox_kernel, prox_channels, stages
//   payload      all parameter tensors as little-endian f32 in the fixed
//                enumeration order (analysis banks, synthesis banks, per-stage
//                prox convs, then eta1/eta2/eta3)
void save_checkpoint(const NetworkParams<float>& params, const std::string& path);
NetworkParams<float> load_checkpoint(const std::string& path);

} // namespace pansharp
