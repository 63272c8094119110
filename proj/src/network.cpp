#include "tslab/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "tslab/format.hpp"

namespace tslab {
namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::tanh: return std::tanh(z);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::softplus: return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  return z;
}

// σ'(z) given z and a = σ(z).
double activate_deriv(Activation act, double z, double a) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - a * a;
    case Activation::sigmoid: return a * (1.0 - a);
    case Activation::softplus: return 1.0 / (1.0 + std::exp(-z));
  }
  return 1.0;
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
  }
  return "identity";
}

std::string_view to_string(Family f) { return f == Family::dlnn ? "dlnn" : "fcdnn"; }

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softplus") return Activation::softplus;
  if (name == "relu" || name == "leaky_relu" || name == "hardtanh") {
    fail(ErrorKind::InvalidSpec, "activation '" + std::string(name) +
                                     "' is not real analytic; use identity, tanh, sigmoid or softplus");
  }
  fail(ErrorKind::InvalidSpec, "unknown activation '" + std::string(name) + "'");
}

Family parse_family(std::string_view name) {
  if (name == "dlnn") return Family::dlnn;
  if (name == "fcdnn") return Family::fcdnn;
  fail(ErrorKind::InvalidSpec, "unknown family '" + std::string(name) + "' (expected dlnn or fcdnn)");
}

NetworkSpec::NetworkSpec(std::vector<std::size_t> widths, Activation activation, Family family)
    : widths_(std::move(widths)), activation_(activation), family_(family) {
  if (widths_.size() < 2) fail(ErrorKind::InvalidSpec, "a network needs at least input and output widths");
  for (auto w : widths_)
    if (w == 0) fail(ErrorKind::InvalidSpec, "layer widths must be positive");
  if (family_ == Family::dlnn && activation_ != Activation::identity) {
    fail(ErrorKind::InvalidSpec, "a dlnn uses the identity activation");
  }
  offsets_.reserve(widths_.size());
  std::size_t off = 0;
  offsets_.push_back(0);
  for (std::size_t l = 1; l < widths_.size(); ++l) {
    off += widths_[l] * (widths_[l - 1] + 1);
    offsets_.push_back(off);
  }
}

std::size_t NetworkSpec::max_width() const noexcept { return *std::max_element(widths_.begin(), widths_.end()); }

std::size_t param_count(const NetworkSpec& spec) {
  std::size_t d = 0;
  for (std::size_t l = 1; l <= spec.depth(); ++l) d += spec.width(l) * (spec.width(l - 1) + 1);
  return d;
}

DomainBox::DomainBox(double b) : half_width(b) {
  if (!(b > 0.0) || !std::isfinite(b)) fail(ErrorKind::InvalidConfig, "box half-width must be positive and finite");
}

bool DomainBox::contains(std::span<const double> theta) const {
  return std::all_of(theta.begin(), theta.end(), [this](double v) { return std::abs(v) <= half_width; });
}

ParamVector::ParamVector(NetworkSpec spec, std::vector<double> data) : spec_(std::move(spec)), data_(std::move(data)) {
  if (data_.size() != spec_.param_count()) {
    fail(ErrorKind::DimensionMismatch, "parameter vector has " + std::to_string(data_.size()) + " entries, spec needs " +
                                           std::to_string(spec_.param_count()));
  }
  for (double v : data_)
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "parameter vector contains a non-finite entry");
}

ParamVector::ParamVector(NetworkSpec spec) : spec_(std::move(spec)), data_(spec_.param_count(), 0.0) {}

Matrix ParamVector::weight(std::size_t layer) const {
  const auto rows = spec_.width(layer), cols = spec_.width(layer - 1);
  const auto off = spec_.weight_offset(layer);
  return Matrix(rows, cols, std::vector<double>(data_.begin() + off, data_.begin() + off + rows * cols));
}

Vector ParamVector::bias(std::size_t layer) const {
  const auto off = spec_.bias_offset(layer);
  return Vector(std::vector<double>(data_.begin() + off, data_.begin() + off + spec_.width(layer)));
}

void ParamVector::set_weight(std::size_t layer, const Matrix& w) {
  if (w.rows() != spec_.width(layer) || w.cols() != spec_.width(layer - 1)) {
    fail(ErrorKind::DimensionMismatch, "weight block shape for layer " + std::to_string(layer));
  }
  std::copy(w.data().begin(), w.data().end(), data_.begin() + spec_.weight_offset(layer));
}

void ParamVector::set_bias(std::size_t layer, std::span<const double> b) {
  if (b.size() != spec_.width(layer)) fail(ErrorKind::DimensionMismatch, "bias length for layer " + std::to_string(layer));
  std::copy(b.begin(), b.end(), data_.begin() + spec_.bias_offset(layer));
}

ParamVector xavier_uniform(const NetworkSpec& spec, SeededRng& rng) {
  std::vector<double> theta(spec.param_count(), 0.0);
  for (std::size_t l = 1; l <= spec.depth(); ++l) {
    const double fan_in = static_cast<double>(spec.width(l - 1));
    const double fan_out = static_cast<double>(spec.width(l));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const auto off = spec.weight_offset(l);
    for (std::size_t i = 0; i < spec.width(l) * spec.width(l - 1); ++i) theta[off + i] = rng.uniform(-limit, limit);
  }
  return ParamVector(spec, std::move(theta));
}

ParamVector box_uniform(const NetworkSpec& spec, const DomainBox& box, SeededRng& rng) {
  std::vector<double> theta(spec.param_count());
  for (double& v : theta) v = rng.uniform(-box.half_width, box.half_width);
  return ParamVector(spec, std::move(theta));
}

// ---------------------------------------------------------------------------

Evaluator::Evaluator(NetworkSpec spec) : spec_(std::move(spec)) {
  const auto L = spec_.depth();
  pre_.resize(L + 1);
  post_.resize(L + 1);
  for (std::size_t l = 0; l <= L; ++l) {
    pre_[l].assign(spec_.width(l), 0.0);
    post_[l].assign(spec_.width(l), 0.0);
  }
  delta_.assign(spec_.max_width(), 0.0);
  delta_prev_.assign(spec_.max_width(), 0.0);
  resid_.assign(spec_.output_dim(), 0.0);
}

void Evaluator::forward_pass(std::span<const double> theta, std::span<const double> x) {
  if (x.size() != spec_.input_dim()) {
    fail(ErrorKind::DimensionMismatch, "input has length " + std::to_string(x.size()) + ", network expects " +
                                           std::to_string(spec_.input_dim()));
  }
  if (theta.size() != spec_.param_count()) fail(ErrorKind::DimensionMismatch, "parameter length mismatch");
  std::copy(x.begin(), x.end(), post_[0].begin());
  const auto L = spec_.depth();
  const auto act = spec_.activation();
  for (std::size_t l = 1; l <= L; ++l) {
    const auto rows = spec_.width(l), cols = spec_.width(l - 1);
    const double* w = theta.data() + spec_.weight_offset(l);
    const double* b = theta.data() + spec_.bias_offset(l);
    const double* in = post_[l - 1].data();
    double* z = pre_[l].data();
    for (std::size_t i = 0; i < rows; ++i) {
      double s = b[i];
      const double* wr = w + i * cols;
      for (std::size_t j = 0; j < cols; ++j) s += wr[j] * in[j];
      z[i] = s;
    }
    double* a = post_[l].data();
    if (l == L || act == Activation::identity) {
      std::copy(z, z + rows, a);
    } else {
      for (std::size_t i = 0; i < rows; ++i) a[i] = activate(act, z[i]);
    }
  }
}

std::span<const double> Evaluator::forward(std::span<const double> theta, std::span<const double> x) {
  forward_pass(theta, x);
  return post_.back();
}

double Evaluator::loss(std::span<const double> theta, const Dataset& data) {
  if (data.input_dim() != spec_.input_dim() || data.output_dim() != spec_.output_dim()) {
    fail(ErrorKind::DimensionMismatch, "dataset dimensions do not match the network");
  }
  if (data.size() == 0) fail(ErrorKind::DimensionMismatch, "empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto out = forward(theta, data.inputs.row(i));
    auto y = data.outputs.row(i);
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double r = out[k] - y[k];
      s += r * r;
    }
    total += 0.5 * s;
  }
  const double l = total / static_cast<double>(data.size());
  if (!std::isfinite(l)) fail(ErrorKind::NonFiniteLoss, "training loss is not finite");
  return l;
}

void Evaluator::backward_pass(std::span<const double> theta, std::span<const double> seed, std::span<double> grad) {
  const auto L = spec_.depth();
  const auto act = spec_.activation();
  std::copy(seed.begin(), seed.end(), delta_.begin());
  for (std::size_t l = L; l >= 1; --l) {
    const auto rows = spec_.width(l), cols = spec_.width(l - 1);
    const double* w = theta.data() + spec_.weight_offset(l);
    double* gw = grad.data() + spec_.weight_offset(l);
    double* gb = grad.data() + spec_.bias_offset(l);
    const double* in = post_[l - 1].data();
    for (std::size_t i = 0; i < rows; ++i) {
      const double d = delta_[i];
      gb[i] += d;
      double* gwr = gw + i * cols;
      for (std::size_t j = 0; j < cols; ++j) gwr[j] += d * in[j];
    }
    if (l == 1) break;
    for (std::size_t j = 0; j < cols; ++j) delta_prev_[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double d = delta_[i];
      const double* wr = w + i * cols;
      for (std::size_t j = 0; j < cols; ++j) delta_prev_[j] += wr[j] * d;
    }
    if (act != Activation::identity) {
      for (std::size_t j = 0; j < cols; ++j) delta_prev_[j] *= activate_deriv(act, pre_[l - 1][j], post_[l - 1][j]);
    }
    std::swap(delta_, delta_prev_);
  }
}

double Evaluator::loss_and_gradient(std::span<const double> theta, const Dataset& data, std::span<double> grad) {
  if (grad.size() != spec_.param_count()) fail(ErrorKind::DimensionMismatch, "gradient buffer length");
  if (data.input_dim() != spec_.input_dim() || data.output_dim() != spec_.output_dim()) {
    fail(ErrorKind::DimensionMismatch, "dataset dimensions do not match the network");
  }
  if (data.size() == 0) fail(ErrorKind::DimensionMismatch, "empty dataset");
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward_pass(theta, data.inputs.row(i));
    auto y = data.outputs.row(i);
    const auto& out = post_.back();
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      resid_[k] = out[k] - y[k];
      s += resid_[k] * resid_[k];
      resid_[k] *= inv_n;
    }
    total += 0.5 * s;
    backward_pass(theta, resid_, grad);
  }
  const double l = total * inv_n;
  if (!std::isfinite(l)) fail(ErrorKind::NonFiniteLoss, "training loss is not finite");
  for (double g : grad)
    if (!std::isfinite(g)) fail(ErrorKind::NonFiniteLoss, "gradient is not finite");
  return l;
}

Matrix Evaluator::jacobian(std::span<const double> theta, std::span<const double> x) {
  forward_pass(theta, x);
  const auto m = spec_.output_dim();
  const auto d = spec_.param_count();
  Matrix jac(m, d);
  std::vector<double> seed(m, 0.0);
  for (std::size_t o = 0; o < m; ++o) {
    std::fill(seed.begin(), seed.end(), 0.0);
    seed[o] = 1.0;
    backward_pass(theta, seed, jac.row(o));
  }
  return jac;
}

Vector forward(const ParamVector& params, std::span<const double> x) {
  Evaluator ev(params.spec());
  auto out = ev.forward(params.data(), x);
  return Vector(std::vector<double>(out.begin(), out.end()));
}

std::vector<double> gradient(const ParamVector& params, const Dataset& data) {
  Evaluator ev(params.spec());
  std::vector<double> g(params.size());
  ev.loss_and_gradient(params.data(), data, g);
  return g;
}

Matrix param_jacobian(const ParamVector& params, std::span<const double> x) {
  Evaluator ev(params.spec());
  return ev.jacobian(params.data(), x);
}

namespace {

double spectral_norm_of_jacobian(const Matrix& jac) {
  // Power iteration on the small m×m Gram matrix JJᵀ.
  const Matrix gram = matmul(jac, jac.transposed());
  const auto m = gram.rows();
  if (m == 1) return std::sqrt(gram(0, 0));
  std::vector<double> v(m, 1.0 / std::sqrt(static_cast<double>(m)));
  std::vector<double> w(m);
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += gram(i, j) * v[j];
      w[i] = s;
    }
    double norm = 0.0;
    for (double c : w) norm += c * c;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / norm;
    const bool converged = std::abs(norm - lambda) <= 1e-8 * norm;
    lambda = norm;
    if (converged) break;
  }
  return std::sqrt(lambda);
}

}  // namespace

double param_jacobian_norm(const ParamVector& params, std::span<const double> x) {
  return spectral_norm_of_jacobian(param_jacobian(params, x));
}

double estimate_lipschitz(const NetworkSpec& spec, const DomainBox& box, const InputBox& input_box,
                          std::size_t n_probe, SeededRng rng) {
  if (n_probe == 0) fail(ErrorKind::InvalidConfig, "n_probe must be at least 1");
  Evaluator ev(spec);
  std::vector<double> theta(spec.param_count());
  std::vector<double> x(spec.input_dim());
  double q = 0.0;
  for (std::size_t p = 0; p < n_probe; ++p) {
    for (double& v : theta) v = rng.uniform(-box.half_width, box.half_width);
    for (double& v : x) v = rng.uniform(input_box.lo, input_box.hi);
    q = std::max(q, spectral_norm_of_jacobian(ev.jacobian(theta, x)));
  }
  return q;
}

// ---------------------------------------------------------------------------

void write_params(std::ostream& out, const ParamVector& params) {
  nlohmann::ordered_json header;
  header["widths"] = params.spec().widths();
  header["activation"] = to_string(params.spec().activation());
  header["family"] = to_string(params.spec().family());
  out << header.dump() << '\n';
  for (double v : params.data()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) fail(ErrorKind::IoError, "failed to write parameter block");
}

ParamVector read_params(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, "missing parameter header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("bad parameter header: ") + e.what());
  }
  NetworkSpec spec(header.at("widths").get<std::vector<std::size_t>>(),
                   parse_activation(header.at("activation").get<std::string>()),
                   parse_family(header.at("family").get<std::string>()));
  std::vector<double> data(spec.param_count());
  for (double& v : data) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) fail(ErrorKind::ParseError, "truncated parameter block");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  return ParamVector(std::move(spec), std::move(data));
}

void write_params_csv(std::ostream& out, const ParamVector& params) {
  for (double v : params.data()) out << fmt17(v) << '\n';
}

}  // namespace tslab
