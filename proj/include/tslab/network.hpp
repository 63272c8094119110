#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "tslab/dataset.hpp"
#include "tslab/linalg.hpp"
#include "tslab/rng.hpp"

namespace tslab {

enum class Activation { identity, tanh, sigmoid, softplus };
enum class Family { dlnn, fcdnn };

std::string_view to_string(Activation a);
std::string_view to_string(Family f);
/// Accepts identity|linear, tanh, sigmoid, softplus. Non-analytic activations
/// such as relu are rejected with InvalidSpec.
Activation parse_activation(std::string_view name);
Family parse_family(std::string_view name);

/// Layer widths [m0, m1, ..., mL] plus activation and model family.
class NetworkSpec {
 public:
  NetworkSpec(std::vector<std::size_t> widths, Activation activation, Family family);

  static NetworkSpec dlnn(std::vector<std::size_t> widths) {
    return NetworkSpec(std::move(widths), Activation::identity, Family::dlnn);
  }
  static NetworkSpec fcdnn(std::vector<std::size_t> widths, Activation activation) {
    return NetworkSpec(std::move(widths), activation, Family::fcdnn);
  }

  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  Activation activation() const noexcept { return activation_; }
  Family family() const noexcept { return family_; }

  /// Number of affine layers L.
  std::size_t depth() const noexcept { return widths_.size() - 1; }
  std::size_t width(std::size_t layer) const { return widths_.at(layer); }
  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t output_dim() const noexcept { return widths_.back(); }
  std::size_t max_width() const noexcept;

  /// Offsets into the flat parameter layout [w1, b1, w2, b2, ...]; layer is 1-based.
  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer - 1); }
  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + widths_[layer] * widths_[layer - 1];
  }
  std::size_t param_count() const noexcept { return offsets_.back(); }

  friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
    return a.widths_ == b.widths_ && a.activation_ == b.activation_ && a.family_ == b.family_;
  }

 private:
  std::vector<std::size_t> widths_;
  Activation activation_;
  Family family_;
  std::vector<std::size_t> offsets_;
};

/// Σ_{ℓ=1}^{L} m_ℓ (m_{ℓ-1} + 1).
std::size_t param_count(const NetworkSpec& spec);

/// Compact parameter domain Θ = [-B, B]^d.
struct DomainBox {
  double half_width = 10.0;

  explicit DomainBox(double b = 10.0);
  bool contains(std::span<const double> theta) const;
};

/// Axis-aligned input domain [lo, hi]^m0.
struct InputBox {
  double lo = -1.0;
  double hi = 1.0;
};

/// Flat parameter vector with the canonical per-layer layout.
class ParamVector {
 public:
  ParamVector(NetworkSpec spec, std::vector<double> data);
  /// All-zero parameters.
  explicit ParamVector(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::span<const double> data() const noexcept { return data_; }
  std::size_t size() const noexcept { return data_.size(); }
  double operator[](std::size_t i) const { return data_[i]; }

  Matrix weight(std::size_t layer) const;
  Vector bias(std::size_t layer) const;
  void set_weight(std::size_t layer, const Matrix& w);
  void set_bias(std::size_t layer, std::span<const double> b);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  NetworkSpec spec_;
  std::vector<double> data_;
};

/// Weights U(-√(6/(fan_in+fan_out)), +√(...)) per layer, biases zero.
ParamVector xavier_uniform(const NetworkSpec& spec, SeededRng& rng);
/// Every coordinate uniform on [-B, B].
ParamVector box_uniform(const NetworkSpec& spec, const DomainBox& box, SeededRng& rng);

/// Reusable forward/backward evaluator over raw parameter spans. Holds scratch
/// buffers, so one instance must not be shared between threads.
class Evaluator {
 public:
  explicit Evaluator(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }

  /// Network output for one input; the span stays valid until the next call.
  std::span<const double> forward(std::span<const double> theta, std::span<const double> x);

  /// L_n(θ) = (1/n) Σ ½‖y_i − f(x_i;θ)‖². Throws NonFiniteLoss on NaN/Inf.
  double loss(std::span<const double> theta, const Dataset& data);

  /// Loss plus its gradient (written to grad, which must have length d).
  double loss_and_gradient(std::span<const double> theta, const Dataset& data, std::span<double> grad);

  /// Jacobian ∂f(x;θ)/∂θ, one reverse pass per output coordinate.
  Matrix jacobian(std::span<const double> theta, std::span<const double> x);

 private:
  void forward_pass(std::span<const double> theta, std::span<const double> x);
  // Accumulates seed-weighted parameter gradients of the last forward pass.
  void backward_pass(std::span<const double> theta, std::span<const double> seed, std::span<double> grad);

  NetworkSpec spec_;
  std::vector<std::vector<double>> pre_;   // z_ℓ
  std::vector<std::vector<double>> post_;  // a_ℓ (post_[0] = x)
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
  std::vector<double> resid_;
};

Vector forward(const ParamVector& params, std::span<const double> x);
std::vector<double> gradient(const ParamVector& params, const Dataset& data);
Matrix param_jacobian(const ParamVector& params, std::span<const double> x);

/// Spectral norm of ∂f(x;θ)/∂θ by power iteration on JJᵀ (relative tolerance 1e-8).
double param_jacobian_norm(const ParamVector& params, std::span<const double> x);

/// Lower estimate of the Lipschitz constant q: the largest Jacobian norm over
/// n_probe pairs with θ uniform in the box and x uniform in the input box.
double estimate_lipschitz(const NetworkSpec& spec, const DomainBox& box, const InputBox& input_box,
                          std::size_t n_probe, SeededRng rng);

/// Binary form: one JSON header line {"widths":…,"activation":…,"family":…}
/// followed by d little-endian float64 values.
void write_params(std::ostream& out, const ParamVector& params);
ParamVector read_params(std::istream& in);
/// One value per line, 17 significant digits.
void write_params_csv(std::ostream& out, const ParamVector& params);

}  // namespace tslab
