#include "tslab/samplers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace tslab {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

constexpr double kDivergenceLimit = 1e12;
constexpr double kMinStep = 1e-300;
constexpr double kZeroCoordinate = 1e-12;

void check_dims(const NetworkSpec& spec, const Dataset& data) {
  if (data.size() == 0) fail(ErrorKind::DimensionMismatch, "empty dataset");
  if (data.input_dim() != spec.input_dim() || data.output_dim() != spec.output_dim()) {
    fail(ErrorKind::DimensionMismatch, "dataset dimensions do not match the student network");
  }
}

SamplerOutcome make_outcome(SamplerKind kind, const SeededRng& rng, ParamVector params) {
  SamplerOutcome out{.params = std::move(params)};
  out.sampler = kind;
  out.seed = rng.master_seed();
  out.stream = rng.stream_id();
  return out;
}

}  // namespace

std::string_view to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::guess_check: return "guess_check";
    case SamplerKind::pattern_search: return "pattern_search";
    case SamplerKind::adam: return "adam";
  }
  return "";
}

std::string_view to_string(Proposal p) { return p == Proposal::xavier_uniform ? "xavier_uniform" : "box_uniform"; }
std::string_view to_string(CoordinateMode m) { return m == CoordinateMode::single ? "single" : "sweep"; }

std::string_view to_string(SamplerStatus s) {
  switch (s) {
    case SamplerStatus::success: return "success";
    case SamplerStatus::exhausted: return "exhausted";
    case SamplerStatus::step_underflow: return "step_underflow";
    case SamplerStatus::non_finite_loss: return "non_finite_loss";
  }
  return "";
}

SamplerKind parse_sampler(std::string_view name) {
  if (name == "gc" || name == "guess_check") return SamplerKind::guess_check;
  if (name == "ps" || name == "pattern_search") return SamplerKind::pattern_search;
  if (name == "adam") return SamplerKind::adam;
  fail(ErrorKind::InvalidConfig, "unknown sampler '" + std::string(name) + "'");
}

Proposal parse_proposal(std::string_view name) {
  if (name == "xavier_uniform") return Proposal::xavier_uniform;
  if (name == "box_uniform") return Proposal::box_uniform;
  fail(ErrorKind::InvalidConfig, "unknown proposal '" + std::string(name) + "'");
}

CoordinateMode parse_coordinate_mode(std::string_view name) {
  if (name == "single") return CoordinateMode::single;
  if (name == "sweep") return CoordinateMode::sweep;
  fail(ErrorKind::InvalidConfig, "unknown coordinate mode '" + std::string(name) + "'");
}

void SamplerConfig::validate() const {
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidConfig, "epsilon must be positive");
  if (!(gamma_dec > 0.0 && gamma_dec < 1.0)) fail(ErrorKind::InvalidConfig, "gamma_dec must lie in (0, 1)");
  if (!(alpha0 > 0.0)) fail(ErrorKind::InvalidConfig, "alpha0 must be positive");
  if (!(adam_lr > 0.0)) fail(ErrorKind::InvalidConfig, "adam_lr must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorKind::InvalidConfig, "adam betas must lie in [0, 1)");
  }
  if (max_iterations == 0) fail(ErrorKind::InvalidConfig, "max_iterations must be positive");
}

SamplerOutcome guess_and_check(const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg,
                               SeededRng rng) {
  cfg.validate();
  check_dims(spec, data);
  const auto start = Clock::now();
  const SeededRng origin = rng;
  Evaluator ev(spec);
  std::optional<ParamVector> best;
  double best_loss = 0.0;
  for (std::size_t draw = 1; draw <= cfg.max_iterations; ++draw) {
    ParamVector theta = cfg.proposal == Proposal::xavier_uniform ? xavier_uniform(spec, rng)
                                                                   : box_uniform(spec, cfg.box, rng);
    double loss;
    try {
      loss = ev.loss(theta.data(), data);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteLoss) throw;
      continue;
    }
    if (loss <= cfg.epsilon) {
      auto out = make_outcome(SamplerKind::guess_check, origin, std::move(theta));
      out.final_loss = loss;
      out.iterations = draw;
      out.status = SamplerStatus::success;
      out.wall_time_ms = elapsed_ms(start);
      return out;
    }
    if (!best || loss < best_loss) {
      best = std::move(theta);
      best_loss = loss;
    }
  }
  auto out = make_outcome(SamplerKind::guess_check, origin, best ? std::move(*best) : ParamVector(spec));
  out.final_loss = best ? best_loss : ev.loss(out.params.data(), data);
  out.iterations = cfg.max_iterations;
  out.status = SamplerStatus::exhausted;
  out.wall_time_ms = elapsed_ms(start);
  return out;
}

SamplerOutcome pattern_search(const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg, SeededRng rng,
                              std::optional<ParamVector> start) {
  cfg.validate();
  check_dims(spec, data);
  const auto t0 = Clock::now();
  const SeededRng origin = rng;
  ParamVector init = start ? std::move(*start) : xavier_uniform(spec, rng);
  if (!(init.spec() == spec)) fail(ErrorKind::DimensionMismatch, "start point does not match the student spec");
  std::vector<double> theta(init.data().begin(), init.data().end());
  const std::size_t d = theta.size();

  Evaluator ev(spec);
  double loss = ev.loss(theta, data);
  double alpha = cfg.alpha0;
  std::size_t k = 0;
  SamplerStatus status = SamplerStatus::exhausted;
  std::vector<double> loss_trace, step_trace;
  if (cfg.record_trace) {
    loss_trace.push_back(loss);
    step_trace.push_back(alpha);
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});

  // Tries θ_i ± δ; keeps the first strict improvement.
  auto try_coordinate = [&](std::size_t i) {
    const double original = theta[i];
    const double delta = std::abs(original) > kZeroCoordinate ? alpha * original : alpha;
    for (double sign : {1.0, -1.0}) {
      theta[i] = original + sign * delta;
      double trial;
      try {
        trial = ev.loss(theta, data);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss) throw;
        continue;
      }
      if (trial < loss) {
        loss = trial;
        return true;
      }
    }
    theta[i] = original;
    return false;
  };

  while (true) {
    if (loss <= cfg.epsilon) {
      status = SamplerStatus::success;
      break;
    }
    if (k >= cfg.max_iterations) {
      status = SamplerStatus::exhausted;
      break;
    }
    if (alpha < kMinStep) {
      status = SamplerStatus::step_underflow;
      break;
    }
    bool improved = false;
    if (cfg.coordinate_mode == CoordinateMode::single) {
      improved = try_coordinate(rng.index(d));
    } else {
      for (std::size_t j = d; j > 1; --j) std::swap(order[j - 1], order[rng.index(j)]);
      for (std::size_t i : order) {
        if (try_coordinate(i)) {
          improved = true;
          break;
        }
      }
    }
    if (!improved) alpha *= cfg.gamma_dec;
    ++k;
    if (cfg.record_trace) {
      loss_trace.push_back(loss);
      step_trace.push_back(alpha);
    }
  }

  auto out = make_outcome(SamplerKind::pattern_search, origin, ParamVector(spec, std::move(theta)));
  out.final_loss = loss;
  out.iterations = k;
  out.status = status;
  out.loss_trace = std::move(loss_trace);
  out.step_trace = std::move(step_trace);
  out.wall_time_ms = elapsed_ms(t0);
  return out;
}

SamplerOutcome adam_near_interpolator(const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg,
                                      SeededRng rng, std::optional<ParamVector> start) {
  cfg.validate();
  check_dims(spec, data);
  const auto t0 = Clock::now();
  const SeededRng origin = rng;
  ParamVector init = start ? std::move(*start) : xavier_uniform(spec, rng);
  if (!(init.spec() == spec)) fail(ErrorKind::DimensionMismatch, "start point does not match the student spec");
  std::vector<double> theta(init.data().begin(), init.data().end());
  const std::size_t d = theta.size();
  std::vector<double> grad(d), m(d, 0.0), v(d, 0.0);

  Evaluator ev(spec);
  SamplerStatus status = SamplerStatus::exhausted;
  double loss = 0.0;
  std::size_t step = 0;
  double beta1_pow = 1.0, beta2_pow = 1.0;
  std::vector<double> last_good = theta;
  double last_good_loss = std::numeric_limits<double>::infinity();
  while (true) {
    try {
      loss = ev.loss_and_gradient(theta, data, grad);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFiniteLoss) throw;
      status = SamplerStatus::non_finite_loss;
      break;
    }
    if (loss > kDivergenceLimit) {
      status = SamplerStatus::non_finite_loss;
      break;
    }
    last_good = theta;
    last_good_loss = loss;
    if (loss <= cfg.epsilon) {
      status = SamplerStatus::success;
      break;
    }
    if (step >= cfg.max_iterations) {
      status = SamplerStatus::exhausted;
      break;
    }
    ++step;
    beta1_pow *= cfg.adam_beta1;
    beta2_pow *= cfg.adam_beta2;
    for (std::size_t i = 0; i < d; ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / (1.0 - beta1_pow);
      const double v_hat = v[i] / (1.0 - beta2_pow);
      theta[i] -= cfg.adam_lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }

  // On divergence the last finite iterate is reported.
  auto out = make_outcome(SamplerKind::adam, origin, ParamVector(spec, std::move(last_good)));
  out.final_loss = last_good_loss;
  out.iterations = step;
  out.status = status;
  out.wall_time_ms = elapsed_ms(t0);
  return out;
}

SamplerOutcome run_sampler(SamplerKind kind, const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg,
                           SeededRng rng) {
  switch (kind) {
    case SamplerKind::guess_check: return guess_and_check(spec, data, cfg, rng);
    case SamplerKind::pattern_search: return pattern_search(spec, data, cfg, rng);
    case SamplerKind::adam: return adam_near_interpolator(spec, data, cfg, rng);
  }
  fail(ErrorKind::InvalidConfig, "unknown sampler");
}

}  // namespace tslab
