// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oracles.hpp"
#include "tslab/dimest.hpp"
#include "tslab/format.hpp"
#include "tslab/harness.hpp"

using namespace tslab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "tslab_acceptance";

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs the CLI with stdout sent to `out`; returns the exit status.
int cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string("\"") + TSLAB_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          out.string() + ".err\"";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Same rank condition the dlnn embedding needs to cancel redundant-unit leakage.
bool leakage_absorbable(const std::vector<std::size_t>& tw, const std::vector<std::size_t>& sw) {
  if (tw == sw) return true;
  const std::size_t m0 = sw.front(), out = sw.back(), L = sw.size() - 1;
  bool spans_input = tw[tw.size() - 2] >= m0;
  for (std::size_t l = 1; l + 1 < L; ++l) spans_input = spans_input && sw[l] >= m0;
  bool reaches_output = tw.size() > 2 && tw[1] >= out;
  for (std::size_t l = 2; l < L; ++l) reaches_output = reaches_output && sw[l] >= out;
  return spans_input || reaches_output;
}

struct Pair {
  NetworkSpec teacher;
  NetworkSpec student;
};

// Depth (layer count) ≤ 6, widths ≤ 10.
Pair random_dlnn_pair(SeededRng& rng) {
  std::vector<std::size_t> tw(2 + rng.index(5));
  for (auto& w : tw) w = 1 + rng.index(10);
  const std::size_t lt = tw.size() - 1;
  const std::size_t ls = lt + rng.index(7 - lt);
  const std::size_t k = tw[lt - 1];
  std::vector<std::size_t> sw(ls + 1);
  sw.front() = tw.front();
  sw.back() = tw.back();
  for (std::size_t l = 1; l < ls; ++l) {
    const std::size_t floor = l < lt ? tw[l] : k;
    sw[l] = floor + rng.index(11 - floor);
  }
  return {NetworkSpec::dlnn(tw), NetworkSpec::dlnn(sw)};
}

Pair random_fcdnn_pair(SeededRng& rng) {
  const Activation acts[] = {Activation::tanh, Activation::sigmoid, Activation::softplus};
  const Activation act = acts[rng.index(3)];
  std::vector<std::size_t> tw(2 + rng.index(6));
  for (auto& w : tw) w = 1 + rng.index(10);
  auto sw = tw;
  for (std::size_t l = 1; l + 1 < sw.size(); ++l) sw[l] += rng.index(11 - sw[l]);
  return {NetworkSpec::fcdnn(tw, act), NetworkSpec::fcdnn(sw, act)};
}

// --- 1 -------------------------------------------------------------------

Verdict bound_exactness() {
  std::ostringstream detail;
  bool ok = true;
  for (const char* student : {"2,10,1", "2,10,10,10,1", "2,10,10,10,10,10,1"}) {
    const auto out = kWork / "bound.json";
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = cli(std::string("bound --family dlnn --teacher 2,5,1 --student ") + student, out);
    const double dt = seconds_since(t0);
    std::size_t k = 0;
    if (rc == 0) k = json::parse(slurp(out))["k_upper"].get<std::size_t>();
    ok = ok && rc == 0 && k == 22 && dt < 1.0;
    detail << student << " -> " << k << " (" << std::lround(dt * 1000) << " ms) ";
  }
  return {ok, detail.str()};
}

// --- 2 -------------------------------------------------------------------

Verdict embedding_equivalence() {
  SeededRng rng(1001, 0);
  double worst_dlnn = 0, worst_fcdnn = 0;
  std::size_t tested = 0, skipped = 0, errors = 0;
  std::string first_error;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t i = 0; tested < 200; ++i) {
    const bool linear = tested % 2 == 0;
    const Pair p = linear ? random_dlnn_pair(rng) : random_fcdnn_pair(rng);
    if (linear && !leakage_absorbable(p.teacher.widths(), p.student.widths())) {
      ++skipped;
      continue;
    }
    ++tested;
    try {
      const Teacher t = make_teacher(p.teacher, rng.child(3 * i));
      const auto w = linear ? embed_dlnn(t, p.student, rng.child(3 * i + 1), DomainBox(1e6))
                            : embed_fcdnn(t, p.student, rng.child(3 * i + 1), DomainBox());
      const double r = equivalence_residual(w.student_params, t, 100, InputBox{}, rng.child(3 * i + 2));
      (linear ? worst_dlnn : worst_fcdnn) = std::max(linear ? worst_dlnn : worst_fcdnn, r);
    } catch (const Error& e) {
      if (errors++ == 0) first_error = e.what();
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream detail;
  detail << "200 configs, max residual dlnn " << worst_dlnn << " fcdnn " << worst_fcdnn << ", errors " << errors
         << ", dlnn pairs skipped as rank-deficient " << skipped << ", " << dt << " s";
  if (errors) detail << " (first error: " << first_error << ")";
  return {errors == 0 && worst_dlnn <= 1e-8 && worst_fcdnn <= 1e-12 && dt < 30.0, detail.str()};
}

// --- 3 -------------------------------------------------------------------

Verdict free_dimension_counts() {
  SeededRng rng(1002, 0);
  std::size_t tested = 0, mismatches = 0, skipped = 0;
  for (std::uint64_t i = 0; tested < 50; ++i) {
    const bool linear = tested % 2 == 0;
    const Pair p = linear ? random_dlnn_pair(rng) : random_fcdnn_pair(rng);
    if (linear && !leakage_absorbable(p.teacher.widths(), p.student.widths())) {
      ++skipped;
      continue;
    }
    ++tested;
    const Teacher t = make_teacher(p.teacher, rng.child(2 * i));
    std::size_t expected = param_count(p.student);
    if (linear) {
      expected -= param_count(p.teacher);
    } else {
      const auto& tw = p.teacher.widths();
      const auto& sw = p.student.widths();
      for (std::size_t l = 1; l < tw.size(); ++l) expected -= tw[l] * (sw[l - 1] + 1);
    }
    try {
      const auto w = linear ? embed_dlnn(t, p.student, rng.child(2 * i + 1), DomainBox(1e6))
                            : embed_fcdnn(t, p.student, rng.child(2 * i + 1), DomainBox());
      if (w.free_dimension != expected) ++mismatches;
    } catch (const Error&) {
      ++mismatches;
    }
  }
  std::ostringstream detail;
  detail << "50 specs, mismatches " << mismatches << ", dlnn pairs skipped as rank-deficient " << skipped;
  return {mismatches == 0, detail.str()};
}

// --- 4 -------------------------------------------------------------------

ExperimentConfig curve_config() {
  ExperimentConfig cfg;
  cfg.teacher_spec = NetworkSpec::dlnn({2, 5, 1});
  cfg.student_spec = NetworkSpec::dlnn({2, 10, 1});
  cfg.sampler = SamplerKind::pattern_search;
  cfg.sampler_cfg.epsilon = 0.01;
  cfg.n_grid = {2, 10, 22, 30};
  cfg.trials_per_n = 100;
  cfg.master_seed = 1;
  cfg.workers = 1;
  return cfg;
}

Verdict test_loss_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_experiment(curve_config());
  const double dt = seconds_since(t0);
  std::ostringstream detail;
  double m2 = 0, m30 = 0;
  for (const auto& row : result.summary.rows) {
    detail << "n=" << row.n << " median " << row.median << " (failed " << row.failed << "); ";
    if (row.n == 2) m2 = row.median;
    if (row.n == 30) m30 = row.median;
  }
  const bool a = m30 <= 1e-2, b = m2 >= 50 * m30;
  detail << "(a) " << (a ? "ok" : "no") << ", (b) ratio " << m2 / m30 << (b ? " ok" : " below 50") << ", " << dt
         << " s single-threaded";
  return {a && b && dt <= 600.0, detail.str()};
}

// --- 5 -------------------------------------------------------------------

Verdict gradient_correctness() {
  SeededRng rng(1005, 0);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checked = 0, bad = 0;
  double worst = 0;
  const Activation acts[] = {Activation::identity, Activation::tanh, Activation::sigmoid, Activation::softplus};
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::size_t> widths(2 + rng.index(4));
    for (auto& w : widths) w = 1 + rng.index(6);
    const Activation act = acts[rep % 4];
    const auto spec = act == Activation::identity ? NetworkSpec::dlnn(widths) : NetworkSpec::fcdnn(widths, act);
    std::vector<double> theta(spec.param_count());
    for (double& v : theta) v = rng.uniform(-1.0, 1.0);
    const ParamVector p(spec, theta);
    const std::size_t n = 1 + rng.index(10);
    Matrix x(n, spec.input_dim()), y(n, spec.output_dim());
    for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
    for (double& v : y.data()) v = rng.uniform(-1.0, 1.0);
    const Dataset d{std::move(x), std::move(y), 0};
    const auto g = gradient(p, d);
    const auto fd = oracle::fd_gradient(spec, p.data(), d);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (std::abs(fd[i]) <= 1e-8) continue;
      const double rel = std::abs(g[i] - fd[i]) / std::abs(fd[i]);
      worst = std::max(worst, rel);
      ++checked;
      if (rel > 1e-5) ++bad;
    }
  }
  const double dt = seconds_since(t0);
  std::ostringstream detail;
  detail << "100 configs, " << checked << " coordinates, max rel error " << worst << ", " << dt << " s";
  return {bad == 0 && dt < 30.0, detail.str()};
}

// --- 6 -------------------------------------------------------------------

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1]) return false;
  return true;
}

Verdict pattern_search_contract() {
  SamplerConfig cfg;
  cfg.record_trace = true;
  std::size_t converged = 0, monotone = 0, runs = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    SeededRng rng(1006, s);
    const auto spec = NetworkSpec::dlnn({1 + rng.index(5), 1 + rng.index(3)});
    const Teacher t = make_teacher(spec, rng.child(1));
    const Dataset d = sample_dataset(t, 1 + rng.index(20), InputBox{}, rng.child(2));
    const auto o = pattern_search(spec, d, cfg, rng.child(3));
    ++runs;
    if (non_increasing(o.loss_trace)) ++monotone;
    if (o.success() && o.final_loss <= cfg.epsilon && train_loss(o.params, d) <= cfg.epsilon) ++converged;
  }
  // Non-convex runs only contribute to the trace check.
  for (std::uint64_t s = 0; s < 100; ++s) {
    SeededRng rng(1106, s);
    const auto spec = NetworkSpec::fcdnn({2, 1 + rng.index(5), 1}, Activation::tanh);
    const Teacher t = make_teacher(NetworkSpec::fcdnn({2, 2, 1}, Activation::tanh), rng.child(1));
    const Dataset d = sample_dataset(t, 1 + rng.index(15), InputBox{}, rng.child(2));
    SamplerConfig c = cfg;
    c.max_iterations = 20000;
    const auto o = pattern_search(spec, d, c, rng.child(3));
    ++runs;
    if (non_increasing(o.loss_trace)) ++monotone;
  }
  std::ostringstream detail;
  detail << "monotone traces " << monotone << "/" << runs << ", convex linear family converged " << converged
         << "/100";
  return {monotone == runs && converged == 100, detail.str()};
}

// --- 7 -------------------------------------------------------------------

PointCloud affine_cloud(std::size_t d, std::size_t ambient, std::size_t n, SeededRng rng) {
  const Matrix q = random_orthogonal(ambient, rng);
  std::vector<double> shift(ambient);
  for (double& v : shift) v = rng.uniform(-5.0, 5.0);
  Matrix pts(n, ambient);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ambient; ++j) pts(i, j) = shift[j];
    for (std::size_t c = 0; c < d; ++c) {
      const double coeff = rng.uniform(-1.0, 1.0);
      for (std::size_t j = 0; j < ambient; ++j) pts(i, j) += coeff * q(j, c);
    }
  }
  return {std::move(pts), "affine"};
}

Verdict lpca_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t d : {1, 2, 3, 5}) {
    const auto est = lpca_estimate(affine_cloud(d, 10, 1000, SeededRng(1007, d)), 50, 0.05);
    ok = ok && est.global_estimate == static_cast<double>(d);
    detail << "d=" << d << " -> " << est.global_estimate << "; ";
  }
  const double dt = seconds_since(t0);
  detail << dt << " s";
  return {ok && dt < 10.0, detail.str()};
}

// --- 8 -------------------------------------------------------------------

Verdict tes_dimension_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto lin = NetworkSpec::dlnn({2, 1});
  const Teacher t = make_teacher(lin, SeededRng(1008, 0));
  TesDimensionRequest req;
  req.sampler = SamplerKind::adam;
  req.n_train_large = 1000;
  req.n_repeats = 200;
  const auto a = estimate_tes_dimension(t, lin, req, SeededRng(1008, 1));
  const double dt_a = seconds_since(t0);

  const auto tspec = NetworkSpec::fcdnn({2, 2, 1}, Activation::tanh);
  const auto sspec = NetworkSpec::fcdnn({2, 4, 1}, Activation::tanh);
  const Teacher ft = make_teacher(tspec, SeededRng(1008, 2));
  const std::size_t free_dim = embed_fcdnn(ft, sspec, SeededRng(1008, 3), DomainBox()).free_dimension;
  Matrix pts(1000, sspec.param_count());
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    const auto p = sample_tes_point(ft, sspec, SeededRng(1008, 100 + i), DomainBox());
    std::copy(p.data().begin(), p.data().end(), pts.row(i).begin());
  }
  const auto b = lpca_estimate(PointCloud{std::move(pts), "tes"}, default_k_neighbors(1000));

  const bool pass_a = a.estimate.global_estimate <= 0.5;
  const bool pass_b = std::abs(b.global_estimate - static_cast<double>(free_dim)) <= 1.0;
  std::ostringstream detail;
  detail << "(a) linear student estimate " << a.estimate.global_estimate << " (failed runs " << a.failed_runs << ", "
         << dt_a << " s)" << (pass_a ? " ok" : " above 0.5") << "; (b) constructed cloud " << b.global_estimate
         << " vs free dimension " << free_dim << (pass_b ? " ok" : " off");
  return {pass_a && pass_b, detail.str()};
}

// --- 9 -------------------------------------------------------------------

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

std::vector<fs::path> files_under(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), dir));
  std::sort(out.begin(), out.end());
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  const auto fa = files_under(a), fb = files_under(b);
  if (fa != fb || fa.empty()) return false;
  for (const auto& f : fa)
    if (f.extension() != ".err" && slurp(a / f) != slurp(b / f)) return false;
  return true;
}

Verdict determinism() {
  const auto cfg_path = kWork / "det_config.json";
  write_json(cfg_path, json::parse(R"({
    "teacher_spec": {"widths": [2, 5, 1]},
    "student_spec": {"widths": [2, 10, 1]},
    "sampler": {"name": "ps", "epsilon": 0.01},
    "n_grid": [2, 10, 22], "trials_per_n": 8, "master_seed": 3})"));
  {
    std::ofstream pts(kWork / "det_points.csv");
    write_point_cloud_csv(pts, affine_cloud(3, 8, 300, SeededRng(1009, 0)));
  }

  struct Case {
    std::string name;
    std::string args;  // {W} → worker count, {D} → output directory
    bool writes_dir;
  };
  const std::vector<Case> cases = {
      {"bound", "bound --family fcdnn --teacher 2,3,1 --student 2,6,1 --activation tanh", false},
      {"verify-embedding", "verify-embedding --family dlnn --teacher 2,5,1 --student 2,10,10,1 --seeds 5", false},
      {"lipschitz", "lipschitz --config " + cfg_path.string() + " --probes 2000", false},
      {"dim-estimate", "dim-estimate --points " + (kWork / "det_points.csv").string() + " --workers {W}", false},
      {"sample", "sample --config " + cfg_path.string() + " --out {D} --workers {W}", true},
      {"sample-adam", "sample --config " + cfg_path.string() + " --sampler adam --out {D} --workers {W}", true},
      {"experiment", "experiment --config " + cfg_path.string() + " --out {D} --workers {W} --q-hat 2.5", true},
  };
  std::ostringstream detail;
  bool ok = true;
  for (const auto& c : cases) {
    std::vector<fs::path> dirs;
    bool rc_ok = true;
    for (int run = 0; run < 3; ++run) {
      const std::string workers = run == 2 ? "4" : "1";
      const auto dir = kWork / ("det_" + c.name + "_" + std::to_string(run));
      fs::remove_all(dir);
      fs::create_directories(dir);
      std::string args = c.args;
      for (auto pos = args.find("{W}"); pos != std::string::npos; pos = args.find("{W}")) args.replace(pos, 3, workers);
      for (auto pos = args.find("{D}"); pos != std::string::npos; pos = args.find("{D}"))
        args.replace(pos, 3, (dir / "out").string());
      rc_ok = rc_ok && cli(args, dir / "stdout.txt") == 0;
      dirs.push_back(dir);
    }
    const bool same = rc_ok && same_tree(dirs[0], dirs[1]) && same_tree(dirs[0], dirs[2]);
    const std::size_t nfiles = files_under(dirs[0]).size();
    ok = ok && same;
    detail << c.name << (same ? " identical" : " DIFFERENT") << " (" << nfiles << " files); ";
  }
  return {ok, detail.str()};
}

// --- 10 ------------------------------------------------------------------

Verdict lipschitz_scaled_check() {
  const auto cfg_path = kWork / "prop2_config.json";
  write_json(cfg_path, json::parse(R"({
    "teacher_spec": {"widths": [2, 1]},
    "student_spec": {"widths": [2, 1]},
    "sampler": {"name": "ps", "epsilon": 1e-8},
    "n_grid": [4, 10, 30], "trials_per_n": 100, "master_seed": 7})"));
  const auto lip_out = kWork / "prop2_lipschitz.json";
  if (cli("lipschitz --config " + cfg_path.string(), lip_out) != 0) return {false, "lipschitz failed"};
  const double q = json::parse(slurp(lip_out))["q_hat"].get<double>();

  const auto dir = kWork / "prop2";
  fs::remove_all(dir);
  const auto out = kWork / "prop2_report.json";
  if (cli("experiment --config " + cfg_path.string() + " --out " + dir.string() + " --workers 4 --q-hat " + fmt17(q),
          out) != 0)
    return {false, "experiment failed: " + slurp(out.string() + ".err")};
  const auto rep = json::parse(slurp(out));
  const double fraction = rep["fraction"].get<double>();
  const std::string caveat = rep["caveat"].get<std::string>();
  const bool caveat_printed = slurp(out.string() + ".err").find("caveat: ") != std::string::npos;
  std::ostringstream detail;
  detail << "q_hat " << q << ", fraction " << fraction << " over " << rep["trials"] << " trials; caveat: " << caveat;
  return {fraction >= 0.95 && caveat_printed && !caveat.empty(), detail.str()};
}

}  // namespace

int main() {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"bound exactness", bound_exactness},
      {"embedding equivalence", embedding_equivalence},
      {"free-dimension counts", free_dimension_counts},
      {"test-loss trend at desk scale", test_loss_trend},
      {"gradient correctness", gradient_correctness},
      {"pattern-search contract", pattern_search_contract},
      {"lPCA recovery", lpca_recovery},
      {"TES-dimension pipeline", tes_dimension_pipeline},
      {"determinism", determinism},
      {"Lipschitz-scaled test-loss diagnostic", lipschitz_scaled_check},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << "criterion " << i + 1 << " " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
              << v.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  fs::remove_all(kWork);
  return failures == 0 ? 0 : 1;
}
