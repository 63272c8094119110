#pragma once

#include <cstdint>

#include "tslab/linalg.hpp"

namespace tslab {

/// Paired samples {(x_i, y_i)}: one row per sample.
struct Dataset {
  Matrix inputs;
  Matrix outputs;
  std::uint64_t gen_seed = 0;

  std::size_t size() const noexcept { return inputs.rows(); }
  std::size_t input_dim() const noexcept { return inputs.cols(); }
  std::size_t output_dim() const noexcept { return outputs.cols(); }
};

}  // namespace tslab
