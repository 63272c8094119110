// tslab command line front end.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tslab/dimest.hpp"
#include "tslab/format.hpp"
#include "tslab/harness.hpp"
#include "tslab/theory.hpp"

using namespace tslab;
using nlohmann::ordered_json;

namespace {

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidSpec, "bad width list '" + text + "'");
    }
  }
  return out;
}

NetworkSpec make_spec(Family family, const std::string& widths, const std::string& activation) {
  if (family == Family::dlnn) return NetworkSpec::dlnn(parse_widths(widths));
  return NetworkSpec::fcdnn(parse_widths(widths), parse_activation(activation));
}

std::filesystem::path output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  fail(ErrorKind::InvalidConfig, "no output directory: pass --out or set output_dir");
}

int cmd_bound(const std::string& fam, const std::string& teacher_w, const std::string& student_w,
              const std::string& act) {
  const Family family = parse_family(fam);
  const auto teacher = make_spec(family, teacher_w, act);
  const auto student = make_spec(family, student_w.empty() ? teacher_w : student_w, act);
  BoundReport report;
  bool ok = true;
  if (family == Family::dlnn) {
    report.preconditions = dlnn_preconditions(teacher, student);
  } else {
    report.preconditions = fcdnn_preconditions(teacher, student);
  }
  for (const auto& p : report.preconditions) ok = ok && p.ok;
  if (ok) report = family == Family::dlnn ? bound_dlnn(teacher, student) : bound_fcdnn(teacher, student);
  report.family = family == Family::dlnn ? BoundFamily::dlnn : BoundFamily::fcdnn;
  if (!ok) report.d_theta = param_count(student);
  std::cout << to_json(report).dump(2) << '\n';
  return ok ? 0 : 3;
}

int cmd_verify(const std::string& fam, const std::string& teacher_w, const std::string& student_w,
               const std::string& act, std::size_t seeds, double box_half_width) {
  const Family family = parse_family(fam);
  const auto teacher_spec = make_spec(family, teacher_w, act);
  const auto student_spec = make_spec(family, student_w, act);
  const double tol = family == Family::dlnn ? 1e-8 : 1e-12;
  const DomainBox box(box_half_width);
  std::size_t failures = 0;
  std::cout << "seed,free_dimension,residual,result\n";
  for (std::size_t s = 0; s < seeds; ++s) {
    const Teacher teacher = make_teacher(teacher_spec, SeededRng(s, 0));
    std::string residual = "nan";
    std::string verdict = "fail";
    std::size_t free_dim = 0;
    try {
      const auto w = family == Family::dlnn ? embed_dlnn(teacher, student_spec, SeededRng(s, 1), box)
                                            : embed_fcdnn(teacher, student_spec, SeededRng(s, 1), box);
      free_dim = w.free_dimension;
      const double r = equivalence_residual(w.student_params, teacher, 100, InputBox{}, SeededRng(s, 2));
      residual = fmt17(r);
      if (r <= tol) verdict = "pass";
    } catch (const Error& e) {
      verdict = std::string("fail:") + std::string(to_string(e.kind()));
    }
    if (verdict != "pass") ++failures;
    std::cout << s << ',' << free_dim << ',' << residual << ',' << verdict << '\n';
  }
  std::cout << "# tolerance=" << fmt17(tol) << " failures=" << failures << '/' << seeds << '\n';
  return failures ? 4 : 0;
}

int cmd_dim(const std::string& points, std::size_t k, double alpha, std::size_t workers) {
  std::ifstream in(points);
  if (!in) fail(ErrorKind::IoError, "cannot open " + points);
  const auto cloud = read_point_cloud_csv(in, points);
  if (k == 0) k = default_k_neighbors(cloud.size());
  const auto est = lpca_estimate(cloud, k, alpha, workers);
  ordered_json j;
  j["global_estimate"] = est.global_estimate;
  j["k"] = est.k_neighbors;
  j["alpha"] = est.fo_alpha;
  j["n_points"] = cloud.size();
  j["ambient_dim"] = cloud.dim();
  j["degenerate_neighborhoods"] = est.degenerate_neighborhoods;
  ordered_json hist = ordered_json::object();
  for (const auto& [dim, count] : est.histogram()) hist[std::to_string(dim)] = count;
  j["histogram"] = hist;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_lipschitz(const std::string& config, std::size_t probes) {
  const auto cfg = load_experiment_config(config);
  const double q = estimate_lipschitz(cfg.student_spec, cfg.sampler_cfg.box, cfg.input_box, probes,
                                      SeededRng(cfg.master_seed, derive_stream({5})));
  ordered_json j;
  j["q_hat"] = q;
  j["probes"] = probes;
  j["student_spec"] = to_json(cfg.student_spec);
  j["box_half_width"] = cfg.sampler_cfg.box.half_width;
  j["input_box"] = {cfg.input_box.lo, cfg.input_box.hi};
  j["master_seed"] = cfg.master_seed;
  j["note"] = "lower estimate: max parameter-Jacobian norm over random probes";
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_experiment(const std::string& config, const std::string& out, std::size_t workers,
                   std::optional<double> q_hat) {
  auto cfg = load_experiment_config(config);
  if (workers) cfg.workers = workers;
  const auto dir = output_dir(out, cfg);
  auto result = run_experiment(cfg);
  result.summary.q_hat = q_hat;
  write_experiment_outputs(result, cfg, dir);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  if (q_hat) {
    const auto rep = check_proposition2(result, cfg.sampler_cfg.epsilon, *q_hat);
    std::ofstream(dir / "proposition2.json") << to_json(rep).dump(2) << '\n';
    std::cerr << "caveat: " << rep.caveat << '\n';
    std::cout << to_json(rep).dump(2) << '\n';
  }
  return 0;
}

int cmd_sample(const std::string& config, const std::string& out, const std::string& sampler, std::size_t workers) {
  auto cfg = load_experiment_config(config);
  if (!sampler.empty()) cfg.sampler = parse_sampler(sampler);
  if (workers) cfg.workers = workers;
  run_sampling(cfg, output_dir(out, cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-student sample complexity lab"};
  app.require_subcommand(1);

  std::string family = "dlnn", teacher, student, activation = "tanh";
  auto* bound = app.add_subcommand("bound", "strong sample complexity bound as JSON");
  bound->add_option("--family", family)->check(CLI::IsMember({"dlnn", "fcdnn"}));
  bound->add_option("--teacher", teacher, "comma separated widths")->required();
  bound->add_option("--student", student, "defaults to the teacher");
  bound->add_option("--activation", activation);

  std::size_t seeds = 20;
  double box_half_width = 1000.0;
  auto* verify = app.add_subcommand("verify-embedding", "check constructed teacher-equivalent students");
  verify->add_option("--family", family)->check(CLI::IsMember({"dlnn", "fcdnn"}));
  verify->add_option("--teacher", teacher)->required();
  verify->add_option("--student", student)->required();
  verify->add_option("--activation", activation);
  verify->add_option("--seeds", seeds);
  verify->add_option("--box", box_half_width, "parameter box half width");

  std::string config, out, sampler, points;
  std::size_t workers = 0, k = 0, probes = 10000;
  double alpha = kDefaultFoAlpha;
  std::optional<double> q_hat;

  auto* sample = app.add_subcommand("sample", "run a sampler per (n, trial) cell");
  sample->add_option("--config", config)->required();
  sample->add_option("--out", out);
  sample->add_option("--sampler", sampler)->check(CLI::IsMember({"gc", "ps", "adam", "guess_check", "pattern_search"}));
  sample->add_option("--workers", workers);

  auto* experiment = app.add_subcommand("experiment", "test loss versus n");
  experiment->add_option("--config", config)->required();
  experiment->add_option("--out", out);
  experiment->add_option("--workers", workers);
  experiment->add_option("--q-hat", q_hat, "also check test loss against the q-scaled bound");

  auto* dim = app.add_subcommand("dim-estimate", "local PCA dimension of a point cloud");
  dim->add_option("--points", points)->required();
  dim->add_option("--k", k, "neighbours, default min(100, N-1)");
  dim->add_option("--alpha", alpha);
  dim->add_option("--workers", workers);

  auto* lip = app.add_subcommand("lipschitz", "estimate q over the parameter box");
  lip->add_option("--config", config)->required();
  lip->add_option("--probes", probes);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bound) return cmd_bound(family, teacher, student, activation);
    if (*verify) return cmd_verify(family, teacher, student, activation, seeds, box_half_width);
    if (*sample) return cmd_sample(config, out, sampler, workers);
    if (*experiment) return cmd_experiment(config, out, workers, q_hat);
    if (*dim) return cmd_dim(points, k, alpha, workers ? workers : 1);
    if (*lip) return cmd_lipschitz(config, probes);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
