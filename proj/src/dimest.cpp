#include "tslab/dimest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "tslab/format.hpp"

namespace tslab {
namespace {

// Local estimate for one query point; returns {dimension, degenerate}.
std::pair<std::size_t, bool> local_dimension(const Matrix& pts, std::size_t query, std::size_t k, double alpha,
                                             std::vector<std::pair<double, std::size_t>>& dist) {
  const auto n = pts.rows();
  const auto dim = pts.cols();
  dist.clear();
  auto q = pts.row(query);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == query) continue;
    auto r = pts.row(j);
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += (r[c] - q[c]) * (r[c] - q[c]);
    dist.emplace_back(s, j);
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  const std::size_t m = k + 1;
  Matrix local(m, dim);
  std::copy(q.begin(), q.end(), local.row(0).begin());
  for (std::size_t i = 0; i < k; ++i) {
    auto src = pts.row(dist[i].second);
    std::copy(src.begin(), src.end(), local.row(i + 1).begin());
  }
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < dim; ++c) mean[c] += local(i, c);
  for (double& v : mean) v /= static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < dim; ++c) local(i, c) -= mean[c];

  // The covariance XᵀX and the Gram matrix XXᵀ share their non-zero spectrum;
  // decompose whichever is smaller.
  const Matrix small = dim <= m ? matmul(local.transposed(), local) : matmul(local, local.transposed());
  const auto ev = symmetric_eigenvalues(small);
  if (ev.empty() || ev.front() <= 0.0) return {0, true};
  const double threshold = alpha * ev.front();
  const auto count = static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [&](double l) { return l > threshold; }));
  return {std::min(count, dim), false};
}

}  // namespace

std::map<std::size_t, std::size_t> DimEstimate::histogram() const {
  std::map<std::size_t, std::size_t> h;
  for (auto d : local_estimates) ++h[d];
  return h;
}

std::size_t default_k_neighbors(std::size_t n_points) { return std::min<std::size_t>(100, n_points == 0 ? 0 : n_points - 1); }

DimEstimate lpca_estimate(const PointCloud& cloud, std::size_t k_neighbors, double fo_alpha, std::size_t workers) {
  const auto n = cloud.size();
  if (k_neighbors < 2) fail(ErrorKind::InvalidConfig, "k_neighbors must be at least 2");
  if (!(fo_alpha > 0.0 && fo_alpha < 1.0)) fail(ErrorKind::InvalidConfig, "fo_alpha must lie in (0, 1)");
  if (n < 2 || n <= k_neighbors) {
    fail(ErrorKind::TooFewPoints, std::to_string(n) + " points cannot supply " + std::to_string(k_neighbors) +
                                      " neighbours per query");
  }
  for (double v : cloud.points.data())
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "point cloud contains a non-finite entry");

  std::vector<std::size_t> local(n, 0);
  std::vector<char> degenerate(n, 0);
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> scratch;
    scratch.reserve(n);
    for (std::size_t i = begin; i < end; ++i) {
      auto [d, deg] = local_dimension(cloud.points, i, k_neighbors, fo_alpha, scratch);
      local[i] = d;
      degenerate[i] = deg;
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(n, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }

  DimEstimate est;
  est.k_neighbors = k_neighbors;
  est.fo_alpha = fo_alpha;
  est.local_estimates = std::move(local);
  est.degenerate_neighborhoods = static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
  const double sum = std::accumulate(est.local_estimates.begin(), est.local_estimates.end(), 0.0);
  est.global_estimate = sum / static_cast<double>(n);
  return est;
}

TesDimensionResult estimate_tes_dimension(const Teacher& teacher, const NetworkSpec& student,
                                          const TesDimensionRequest& req, SeededRng rng) {
  const std::size_t k = req.k_neighbors ? req.k_neighbors : default_k_neighbors(req.n_repeats);
  if (req.n_repeats < k + 1) {
    fail(ErrorKind::TooFewPoints, "n_repeats " + std::to_string(req.n_repeats) + " is below k_neighbors + 1 = " +
                                      std::to_string(k + 1));
  }
  if (req.n_train_large == 0) fail(ErrorKind::InvalidConfig, "n_train_large must be positive");
  const Dataset data = sample_dataset(teacher, req.n_train_large, req.input_box, rng.child(0));

  std::vector<double> rows;
  std::size_t ok = 0, failed = 0;
  for (std::size_t r = 0; r < req.n_repeats; ++r) {
    auto outcome = run_sampler(req.sampler, student, data, req.sampler_cfg, rng.child(1 + r));
    if (!outcome.success()) {
      ++failed;
      continue;
    }
    rows.insert(rows.end(), outcome.params.data().begin(), outcome.params.data().end());
    ++ok;
  }
  if (ok < k + 1) {
    fail(ErrorKind::TooFewPoints, "only " + std::to_string(ok) + " of " + std::to_string(req.n_repeats) +
                                      " sampler runs succeeded");
  }
  TesDimensionResult result;
  result.cloud = PointCloud{Matrix(ok, student.param_count(), std::move(rows)), "near-interpolators"};
  result.estimate = lpca_estimate(result.cloud, k, req.fo_alpha);
  result.failed_runs = failed;
  return result;
}

PointCloud read_point_cloud_csv(std::istream& in, std::string source) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  bool first_line = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first_line) {
        first_line = false;
        continue;
      }
      fail(ErrorKind::ParseError, "non-numeric cell in point cloud row " + std::to_string(rows + 1));
    }
    first_line = false;
    if (cols == 0) cols = row.size();
    if (row.size() != cols) fail(ErrorKind::ParseError, "ragged point cloud at row " + std::to_string(rows + 1));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::TooFewPoints, "point cloud is empty");
  return PointCloud{Matrix(rows, cols, std::move(values)), std::move(source)};
}

void write_point_cloud_csv(std::ostream& out, const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    bool first = true;
    for (double v : cloud.points.row(i)) {
      out << (first ? "" : ",") << fmt17(v);
      first = false;
    }
    out << '\n';
  }
}

}  // namespace tslab
