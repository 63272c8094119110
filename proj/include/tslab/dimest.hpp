#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tslab/data.hpp"
#include "tslab/linalg.hpp"
#include "tslab/samplers.hpp"

namespace tslab {

/// N points in R^D, one row per (flattened) parameter vector.
struct PointCloud {
  Matrix points;
  std::string source;

  std::size_t size() const noexcept { return points.rows(); }
  std::size_t dim() const noexcept { return points.cols(); }
};

struct DimEstimate {
  double global_estimate = 0.0;
  std::vector<std::size_t> local_estimates;
  std::size_t k_neighbors = 0;
  double fo_alpha = 0.0;
  /// Points whose neighbourhood had zero spread (local estimate 0).
  std::size_t degenerate_neighborhoods = 0;

  std::map<std::size_t, std::size_t> histogram() const;
};

inline constexpr double kDefaultFoAlpha = 0.05;
/// min(100, N - 1).
std::size_t default_k_neighbors(std::size_t n_points);

/// Local PCA with the Fukunaga–Olsen rule. Each neighbourhood is the query
/// point plus its k nearest other points (Euclidean, ties broken by index);
/// the local dimension is the number of covariance eigenvalues above
/// fo_alpha·λ_max. The global estimate is the mean of local estimates.
///
/// Neighbour search is exhaustive, and queries are spread over `workers`
/// threads; results do not depend on the thread count.
DimEstimate lpca_estimate(const PointCloud& cloud, std::size_t k_neighbors, double fo_alpha = kDefaultFoAlpha,
                          std::size_t workers = 1);

/// Samples n_repeats near-interpolators on one dataset of size n_train_large
/// and runs lpca_estimate on their parameter vectors.
struct TesDimensionRequest {
  SamplerKind sampler = SamplerKind::adam;
  SamplerConfig sampler_cfg;
  std::size_t n_train_large = 0;
  std::size_t n_repeats = 0;
  std::size_t k_neighbors = 0;  // 0 → default_k_neighbors(n_repeats)
  double fo_alpha = kDefaultFoAlpha;
  InputBox input_box;
};

struct TesDimensionResult {
  DimEstimate estimate;
  PointCloud cloud;
  std::size_t failed_runs = 0;
};

/// Throws TooFewPoints when n_repeats < k_neighbors + 1 or when fewer than
/// k_neighbors + 1 sampler runs succeed.
TesDimensionResult estimate_tes_dimension(const Teacher& teacher, const NetworkSpec& student,
                                          const TesDimensionRequest& req, SeededRng rng);

/// CSV cloud: one row per point, comma separated; an optional non-numeric header row is skipped.
PointCloud read_point_cloud_csv(std::istream& in, std::string source);
void write_point_cloud_csv(std::ostream& out, const PointCloud& cloud);

}  // namespace tslab
