#pragma once

#include <string>

#include "mireg/attention.hpp"

namespace mireg {

// JSON manifest, format tag "mireg-weights-v1". Tensors are stored row-major
// under fixed names (w_q, w_k, w_v, w_r, fuse.*, geo.*, mask.*).
void save_weights(const AttentionParams& params, const std::string& path);

// Throws std::invalid_argument on a missing file, wrong format tag, missing
// tensor, or shape mismatch.
AttentionParams load_weights(const std::string& path);

}  // namespace mireg
