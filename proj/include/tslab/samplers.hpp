#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tslab/dataset.hpp"
#include "tslab/network.hpp"

namespace tslab {

enum class SamplerKind { guess_check, pattern_search, adam };
enum class Proposal { xavier_uniform, box_uniform };
/// single: one random coordinate per iteration, step decays on its failure.
/// sweep: every coordinate (random order) is tried before the step decays.
enum class CoordinateMode { single, sweep };
enum class SamplerStatus { success, exhausted, step_underflow, non_finite_loss };

std::string_view to_string(SamplerKind k);
std::string_view to_string(Proposal p);
std::string_view to_string(CoordinateMode m);
std::string_view to_string(SamplerStatus s);
/// Accepts the long names and the CLI abbreviations gc, ps, adam.
SamplerKind parse_sampler(std::string_view name);
Proposal parse_proposal(std::string_view name);
CoordinateMode parse_coordinate_mode(std::string_view name);

struct SamplerConfig {
  double epsilon = 0.01;
  std::size_t max_iterations = 1'000'000;
  Proposal proposal = Proposal::xavier_uniform;
  double alpha0 = 1.0;
  double gamma_dec = 0.5;
  CoordinateMode coordinate_mode = CoordinateMode::sweep;
  double adam_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  DomainBox box{10.0};
  /// Keep the per-iteration loss and step-size history (pattern search).
  bool record_trace = false;

  /// Throws InvalidConfig unless epsilon > 0, 0 < gamma_dec < 1, alpha0 > 0.
  void validate() const;
};

struct SamplerOutcome {
  ParamVector params;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  double wall_time_ms = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  SamplerKind sampler = SamplerKind::pattern_search;
  SamplerStatus status = SamplerStatus::exhausted;
  std::vector<double> loss_trace;
  std::vector<double> step_trace;

  bool success() const noexcept { return status == SamplerStatus::success; }
};

/// Rejection sampling: draw θ from the proposal until L_n(θ) ≤ ε.
SamplerOutcome guess_and_check(const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg,
                               SeededRng rng);

/// Derivative-free coordinate pattern search. Trial points perturb coordinate
/// i by ±α·θ_i (additively by ±α when |θ_i| ≤ 1e-12); an improving trial is
/// accepted with α kept, otherwise α ← γ_dec·α. The loss never increases.
SamplerOutcome pattern_search(const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg, SeededRng rng,
                              std::optional<ParamVector> start = std::nullopt);

/// Full-batch Adam on L_n from a Xavier start until L_n ≤ ε.
SamplerOutcome adam_near_interpolator(const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg,
                                      SeededRng rng, std::optional<ParamVector> start = std::nullopt);

SamplerOutcome run_sampler(SamplerKind kind, const NetworkSpec& spec, const Dataset& data, const SamplerConfig& cfg,
                           SeededRng rng);

}  // namespace tslab
