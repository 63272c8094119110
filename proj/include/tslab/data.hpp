#pragma once

#include <cstddef>
#include <iosfwd>

#include "tslab/dataset.hpp"
#include "tslab/network.hpp"

namespace tslab {

/// Fixed teacher network f*(·; θ*).
struct Teacher {
  ParamVector params;

  const NetworkSpec& spec() const noexcept { return params.spec(); }
};

/// Xavier-uniform weights, zero biases.
Teacher make_teacher(const NetworkSpec& spec, SeededRng rng);

/// n inputs i.i.d. uniform on the input box, labelled by the teacher (noiseless).
Dataset sample_dataset(const Teacher& teacher, std::size_t n, const InputBox& input_box, SeededRng rng);

/// (1/n) Σ ½‖y_i − f(x_i;θ)‖².
double train_loss(const ParamVector& params, const Dataset& data);

/// Monte-Carlo generalization error on n_test fresh samples from the seeded stream.
double test_loss(const ParamVector& params, const Teacher& teacher, std::size_t n_test, const InputBox& input_box,
                 SeededRng rng);

inline constexpr std::size_t kDefaultTestSamples = 2000;

/// CSV with header x_0,…,y_0,…; 17 significant digits.
void write_dataset_csv(std::ostream& out, const Dataset& data);
/// Reads the CSV written above; input/output split comes from the header.
Dataset read_dataset_csv(std::istream& in);

}  // namespace tslab
