#include "tslab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "tslab/format.hpp"

namespace tslab {
namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(ErrorKind::InvalidConfig, where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) fail(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("bad value for '") + key + "': " + e.what());
  }
}

NetworkSpec parse_spec(const json& obj, const std::string& where) {
  reject_unknown_keys(obj, {"widths", "activation", "family"}, where);
  if (!obj.contains("widths")) fail(ErrorKind::InvalidConfig, where + " needs 'widths'");
  auto widths = get_or<std::vector<std::size_t>>(obj, "widths", {});
  const auto act = parse_activation(get_or<std::string>(obj, "activation", "identity"));
  const auto fam = parse_family(get_or<std::string>(obj, "family", act == Activation::identity ? "dlnn" : "fcdnn"));
  return NetworkSpec(std::move(widths), act, fam);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::IoError, "failed writing " + path.string());
}

std::string params_file_name(std::size_t n, std::size_t trial) {
  return "params/n" + std::to_string(n) + "_t" + std::to_string(trial) + ".bin";
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

}  // namespace

void ExperimentConfig::validate() const {
  sampler_cfg.validate();
  if (n_grid.empty()) fail(ErrorKind::InvalidConfig, "n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] == 0) fail(ErrorKind::InvalidConfig, "n_grid entries must be positive");
    if (i && n_grid[i] <= n_grid[i - 1]) fail(ErrorKind::InvalidConfig, "n_grid must be strictly ascending");
  }
  if (trials_per_n == 0) fail(ErrorKind::InvalidConfig, "trials_per_n must be at least 1");
  if (n_test == 0) fail(ErrorKind::InvalidConfig, "n_test must be at least 1");
  if (!(input_box.lo < input_box.hi)) fail(ErrorKind::InvalidConfig, "input_box needs lo < hi");
  if (teacher_spec.input_dim() != student_spec.input_dim() || teacher_spec.output_dim() != student_spec.output_dim()) {
    fail(ErrorKind::InvalidConfig, "teacher and student must share input and output dimensions");
  }
}

ExperimentConfig parse_experiment_config(const json& doc) {
  reject_unknown_keys(doc,
                      {"teacher_spec", "student_spec", "sampler", "n_grid", "trials_per_n", "n_test", "input_box",
                       "master_seed", "output_dir", "workers", "record_wall_time", "save_params"},
                      "config");
  ExperimentConfig cfg;
  try {
    if (!doc.contains("teacher_spec") || !doc.contains("student_spec")) {
      fail(ErrorKind::InvalidConfig, "config needs teacher_spec and student_spec");
    }
    cfg.teacher_spec = parse_spec(doc.at("teacher_spec"), "teacher_spec");
    cfg.student_spec = parse_spec(doc.at("student_spec"), "student_spec");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidSpec) fail(ErrorKind::InvalidConfig, e.what());
    throw;
  }
  if (doc.contains("sampler")) {
    const auto& s = doc.at("sampler");
    reject_unknown_keys(s,
                        {"name", "epsilon", "max_iterations", "proposal", "alpha0", "gamma_dec", "coordinate_mode",
                         "adam_lr", "adam_betas", "adam_eps", "box_half_width"},
                        "sampler");
    auto& c = cfg.sampler_cfg;
    cfg.sampler = parse_sampler(get_or<std::string>(s, "name", "pattern_search"));
    c.epsilon = get_or(s, "epsilon", c.epsilon);
    c.max_iterations = get_or(s, "max_iterations", c.max_iterations);
    c.proposal = parse_proposal(get_or<std::string>(s, "proposal", std::string(to_string(c.proposal))));
    c.alpha0 = get_or(s, "alpha0", c.alpha0);
    c.gamma_dec = get_or(s, "gamma_dec", c.gamma_dec);
    c.coordinate_mode =
        parse_coordinate_mode(get_or<std::string>(s, "coordinate_mode", std::string(to_string(c.coordinate_mode))));
    c.adam_lr = get_or(s, "adam_lr", c.adam_lr);
    auto betas = get_or<std::vector<double>>(s, "adam_betas", {c.adam_beta1, c.adam_beta2});
    if (betas.size() != 2) fail(ErrorKind::InvalidConfig, "adam_betas needs two values");
    c.adam_beta1 = betas[0];
    c.adam_beta2 = betas[1];
    c.adam_eps = get_or(s, "adam_eps", c.adam_eps);
    c.box = DomainBox(get_or(s, "box_half_width", c.box.half_width));
  }
  cfg.n_grid = get_or<std::vector<std::size_t>>(doc, "n_grid", {});
  cfg.trials_per_n = get_or(doc, "trials_per_n", cfg.trials_per_n);
  cfg.n_test = get_or(doc, "n_test", cfg.n_test);
  auto box = get_or<std::vector<double>>(doc, "input_box", {cfg.input_box.lo, cfg.input_box.hi});
  if (box.size() != 2) fail(ErrorKind::InvalidConfig, "input_box must be [lo, hi]");
  cfg.input_box = InputBox{box[0], box[1]};
  cfg.master_seed = get_or<std::uint64_t>(doc, "master_seed", 0);
  cfg.output_dir = get_or<std::string>(doc, "output_dir", "");
  cfg.workers = get_or<std::size_t>(doc, "workers", 1);
  cfg.record_wall_time = get_or(doc, "record_wall_time", false);
  cfg.save_params = get_or(doc, "save_params", true);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, "config " + path.string() + ": " + e.what());
  }
  return parse_experiment_config(doc);
}

ordered_json to_json(const NetworkSpec& spec) {
  ordered_json j;
  j["widths"] = spec.widths();
  j["activation"] = to_string(spec.activation());
  j["family"] = to_string(spec.family());
  return j;
}

ordered_json to_json(const ExperimentConfig& cfg) {
  const auto& c = cfg.sampler_cfg;
  ordered_json j;
  j["teacher_spec"] = to_json(cfg.teacher_spec);
  j["student_spec"] = to_json(cfg.student_spec);
  ordered_json s;
  s["name"] = to_string(cfg.sampler);
  s["epsilon"] = c.epsilon;
  s["max_iterations"] = c.max_iterations;
  s["proposal"] = to_string(c.proposal);
  s["alpha0"] = c.alpha0;
  s["gamma_dec"] = c.gamma_dec;
  s["coordinate_mode"] = to_string(c.coordinate_mode);
  s["adam_lr"] = c.adam_lr;
  s["adam_betas"] = {c.adam_beta1, c.adam_beta2};
  s["adam_eps"] = c.adam_eps;
  s["box_half_width"] = c.box.half_width;
  j["sampler"] = s;
  j["n_grid"] = cfg.n_grid;
  j["trials_per_n"] = cfg.trials_per_n;
  j["n_test"] = cfg.n_test;
  j["input_box"] = {cfg.input_box.lo, cfg.input_box.hi};
  j["master_seed"] = cfg.master_seed;
  j["output_dir"] = cfg.output_dir;
  j["record_wall_time"] = cfg.record_wall_time;
  j["save_params"] = cfg.save_params;
  return j;
}

ordered_json to_json(const BoundReport& r) {
  ordered_json j;
  j["family"] = to_string(r.family);
  j["d_theta"] = r.d_theta;
  j["d_tes_lower"] = r.d_tes_lower;
  j["k_upper"] = r.k_upper;
  j["preconditions"] = ordered_json::array();
  for (const auto& p : r.preconditions) j["preconditions"].push_back(ordered_json{{"name", p.name}, {"ok", p.ok}});
  return j;
}

std::uint64_t trial_stream(std::size_t n, std::size_t trial, StreamPurpose purpose) {
  return derive_stream({static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial),
                        static_cast<std::uint64_t>(purpose)});
}

Teacher experiment_teacher(const ExperimentConfig& cfg) {
  return make_teacher(cfg.teacher_spec,
                      SeededRng(cfg.master_seed, derive_stream({static_cast<std::uint64_t>(StreamPurpose::teacher)})));
}

std::optional<BoundReport> experiment_bound(const ExperimentConfig& cfg, std::vector<std::string>* warnings) {
  try {
    if (cfg.student_spec.family() == Family::dlnn && cfg.teacher_spec.family() == Family::dlnn) {
      return bound_dlnn(cfg.teacher_spec, cfg.student_spec);
    }
    return bound_fcdnn(cfg.teacher_spec, cfg.student_spec);
  } catch (const Error& e) {
    if (warnings) warnings->push_back(std::string("bound annotation omitted: ") + e.what());
    return std::nullopt;
  }
}

CurveSummary summarize(const std::vector<ExperimentRecord>& records, const std::vector<std::size_t>& n_grid,
                       double epsilon, std::optional<std::size_t> k_upper) {
  CurveSummary s;
  s.epsilon = epsilon;
  s.k_upper = k_upper;
  for (auto n : n_grid) {
    CurveRow row;
    row.n = n;
    std::vector<double> losses;
    for (const auto& r : records) {
      if (r.n != n) continue;
      if (r.success()) {
        losses.push_back(r.test_loss);
      } else {
        ++row.failed;
      }
    }
    row.count = losses.size();
    if (!losses.empty()) {
      double sum = 0.0;
      for (double v : losses) sum += v;
      row.mean = sum / static_cast<double>(losses.size());
      double var = 0.0;
      for (double v : losses) var += (v - row.mean) * (v - row.mean);
      row.std = std::sqrt(var / static_cast<double>(losses.size()));
      row.median = median_of(losses);
    }
    s.rows.push_back(row);
  }
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.bound = experiment_bound(cfg, &result.warnings);
  const Teacher teacher = experiment_teacher(cfg);

  const std::size_t cells = cfg.n_grid.size() * cfg.trials_per_n;
  result.records.resize(cells);
  parallel_for(cells, cfg.workers, [&](std::size_t idx) {
    const std::size_t n = cfg.n_grid[idx / cfg.trials_per_n];
    const std::size_t trial = idx % cfg.trials_per_n;
    ExperimentRecord rec;
    rec.n = n;
    rec.trial = trial;
    rec.seed = derive_stream({static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});
    try {
      const Dataset data =
          sample_dataset(teacher, n, cfg.input_box, SeededRng(cfg.master_seed, trial_stream(n, trial, StreamPurpose::dataset)));
      auto outcome = run_sampler(cfg.sampler, cfg.student_spec, data, cfg.sampler_cfg,
                                 SeededRng(cfg.master_seed, trial_stream(n, trial, StreamPurpose::sampler)));
      rec.status = std::string(to_string(outcome.status));
      rec.iterations = outcome.iterations;
      rec.train_loss = outcome.final_loss;
      rec.wall_time_ms = cfg.record_wall_time ? outcome.wall_time_ms : 0.0;
      rec.test_loss = test_loss(outcome.params, teacher, cfg.n_test, cfg.input_box,
                                SeededRng(cfg.master_seed, trial_stream(n, trial, StreamPurpose::test)));
      rec.params.assign(outcome.params.data().begin(), outcome.params.data().end());
    } catch (const Error& e) {
      rec.status = "error";
      rec.train_loss = std::nan("");
      rec.test_loss = std::nan("");
    }
    result.records[idx] = std::move(rec);
  });
  // Cells are laid out as n-major already; keep an explicit order guarantee.
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const auto& a, const auto& b) { return std::tie(a.n, a.trial) < std::tie(b.n, b.trial); });

  result.summary = summarize(result.records, cfg.n_grid, cfg.sampler_cfg.epsilon,
                             result.bound ? std::optional(result.bound->k_upper) : std::nullopt);
  return result;
}

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  out << "n,trial,seed,status,iterations,train_loss,test_loss,wall_time_ms\n";
  for (const auto& r : records) {
    out << r.n << ',' << r.trial << ',' << r.seed << ',' << r.status << ',' << r.iterations << ','
        << fmt17(r.train_loss) << ',' << fmt17(r.test_loss) << ',' << fmt17(r.wall_time_ms) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const CurveSummary& s) {
  out << "# k_upper=" << (s.k_upper ? std::to_string(*s.k_upper) : "none") << '\n';
  out << "# epsilon=" << fmt17(s.epsilon) << '\n';
  out << "# q_hat=" << (s.q_hat ? fmt17(*s.q_hat) : "none") << '\n';
  out << "# failures=";
  for (std::size_t i = 0; i < s.rows.size(); ++i) out << (i ? ";" : "") << s.rows[i].n << ':' << s.rows[i].failed;
  out << '\n';
  out << "n,count,mean,std,median\n";
  for (const auto& r : s.rows) {
    out << r.n << ',' << r.count << ',' << fmt17(r.mean) << ',' << fmt17(r.std) << ',' << fmt17(r.median) << '\n';
  }
}

CurveSummary parse_summary_csv(std::istream& in) {
  CurveSummary s;
  std::vector<std::pair<std::size_t, std::size_t>> failures;
  std::string line;
  bool header_seen = false;
  auto value_after = [](const std::string& l, const std::string& key) { return l.substr(key.size()); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# k_upper=", 0) == 0) {
      auto v = value_after(line, "# k_upper=");
      if (v != "none") s.k_upper = std::stoull(v);
    } else if (line.rfind("# epsilon=", 0) == 0) {
      s.epsilon = std::stod(value_after(line, "# epsilon="));
    } else if (line.rfind("# q_hat=", 0) == 0) {
      auto v = value_after(line, "# q_hat=");
      if (v != "none") s.q_hat = std::stod(v);
    } else if (line.rfind("# failures=", 0) == 0) {
      std::stringstream ss(value_after(line, "# failures="));
      std::string item;
      while (std::getline(ss, item, ';')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) fail(ErrorKind::ParseError, "bad failures entry '" + item + "'");
        failures.emplace_back(std::stoull(item.substr(0, colon)), std::stoull(item.substr(colon + 1)));
      }
    } else if (line[0] == '#') {
      continue;
    } else if (!header_seen) {
      if (line != "n,count,mean,std,median") fail(ErrorKind::ParseError, "unexpected summary header '" + line + "'");
      header_seen = true;
    } else {
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() != 5) fail(ErrorKind::ParseError, "summary row needs 5 columns");
      CurveRow r;
      r.n = std::stoull(cells[0]);
      r.count = std::stoull(cells[1]);
      r.mean = std::stod(cells[2]);
      r.std = std::stod(cells[3]);
      r.median = std::stod(cells[4]);
      for (const auto& [n, f] : failures)
        if (n == r.n) r.failed = f;
      s.rows.push_back(r);
    }
  }
  if (!header_seen) fail(ErrorKind::ParseError, "summary file has no column header");
  return s;
}

void emit_plot_data(const CurveSummary& summary, const fs::path& path) {
  std::ostringstream csv;
  write_summary_csv(csv, summary);
  write_text_file(path, csv.str());

  std::ostringstream gp;
  gp << "# gnuplot script: test loss vs number of training samples\n"
     << "set datafile separator ','\n"
     << "set key autotitle columnhead\n"
     << "set logscale y\n"
     << "set xlabel 'number of training samples n'\n"
     << "set ylabel 'test loss'\n";
  if (summary.k_upper) {
    gp << "set arrow from " << *summary.k_upper << ", graph 0 to " << *summary.k_upper
       << ", graph 1 nohead lc rgb 'red'\n";
  }
  gp << "plot '" << path.filename().string() << "' using 1:3:4 with yerrorbars title 'mean test loss'\n";
  auto script = path;
  script.replace_extension(".gp");
  write_text_file(script, gp.str());
}

void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::ostringstream records;
  write_records_csv(records, result.records);
  write_text_file(dir / "records.csv", records.str());
  emit_plot_data(result.summary, dir / "summary.csv");

  if (cfg.save_params) {
    fs::create_directories(dir / "params", ec);
    if (ec) fail(ErrorKind::IoError, "cannot create params directory: " + ec.message());
    for (const auto& r : result.records) {
      if (r.params.empty()) continue;
      std::ofstream out(dir / params_file_name(r.n, r.trial), std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorKind::IoError, "cannot write params file");
      write_params(out, ParamVector(cfg.student_spec, r.params));
    }
  }

  ordered_json manifest;
  manifest["config"] = to_json(cfg);
  manifest["bound"] = result.bound ? to_json(*result.bound) : ordered_json(nullptr);
  manifest["warnings"] = result.warnings;
  ordered_json failures = ordered_json::object();
  for (const auto& row : result.summary.rows) {
    const auto total = row.count + row.failed;
    failures[std::to_string(row.n)] = total ? static_cast<double>(row.failed) / static_cast<double>(total) : 0.0;
  }
  manifest["failure_rate"] = failures;
  manifest["files"] = {"records.csv", "summary.csv", "summary.gp"};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Proposition2Report check_proposition2(const ExperimentResult& result, double epsilon, double q_hat, double safety) {
  Proposition2Report rep;
  rep.q_hat = q_hat;
  rep.epsilon = epsilon;
  rep.safety = safety;
  rep.epsilon_effective = std::sqrt(2.0 * epsilon) * safety;
  rep.threshold = (q_hat * rep.epsilon_effective) * (q_hat * rep.epsilon_effective);
  if (result.bound) rep.min_n = result.bound->k_upper;
  rep.caveat =
      "heuristic: samplers stop on a training-loss sublevel set, not on a metric neighbourhood of the "
      "interpolating set; epsilon is converted via sqrt(2*epsilon)*safety";
  for (const auto& r : result.records) {
    if (!r.success()) continue;
    if (rep.min_n && r.n < *rep.min_n) continue;
    ++rep.trials;
    if (r.test_loss <= rep.threshold) ++rep.satisfied;
  }
  if (rep.trials == 0) fail(ErrorKind::NoSuccessfulTrials, "no successful trials at n >= k_upper");
  rep.fraction = static_cast<double>(rep.satisfied) / static_cast<double>(rep.trials);
  return rep;
}

ordered_json to_json(const Proposition2Report& r) {
  ordered_json j;
  j["q_hat"] = r.q_hat;
  j["epsilon"] = r.epsilon;
  j["safety"] = r.safety;
  j["epsilon_effective"] = r.epsilon_effective;
  j["threshold"] = r.threshold;
  j["min_n"] = r.min_n ? ordered_json(*r.min_n) : ordered_json(nullptr);
  j["trials"] = r.trials;
  j["satisfied"] = r.satisfied;
  j["fraction"] = r.fraction;
  j["caveat"] = r.caveat;
  return j;
}

ordered_json outcome_json(const SamplerOutcome& o, const std::string& params_file, bool record_wall_time) {
  ordered_json j;
  j["sampler"] = to_string(o.sampler);
  j["seed"] = o.seed;
  j["stream"] = o.stream;
  j["status"] = to_string(o.status);
  j["iterations"] = o.iterations;
  j["final_loss"] = o.final_loss;
  j["wall_time_ms"] = record_wall_time ? o.wall_time_ms : 0.0;
  j["params_file"] = params_file;
  return j;
}

void run_sampling(const ExperimentConfig& cfg, const fs::path& dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  const Teacher teacher = experiment_teacher(cfg);
  const std::size_t cells = cfg.n_grid.size() * cfg.trials_per_n;
  std::vector<std::optional<SamplerOutcome>> outcomes(cells);
  parallel_for(cells, cfg.workers, [&](std::size_t idx) {
    const std::size_t n = cfg.n_grid[idx / cfg.trials_per_n];
    const std::size_t trial = idx % cfg.trials_per_n;
    const Dataset data =
        sample_dataset(teacher, n, cfg.input_box, SeededRng(cfg.master_seed, trial_stream(n, trial, StreamPurpose::dataset)));
    outcomes[idx] = run_sampler(cfg.sampler, cfg.student_spec, data, cfg.sampler_cfg,
                                SeededRng(cfg.master_seed, trial_stream(n, trial, StreamPurpose::sampler)));
  });
  std::ostringstream lines;
  for (std::size_t idx = 0; idx < cells; ++idx) {
    const std::size_t n = cfg.n_grid[idx / cfg.trials_per_n];
    const std::size_t trial = idx % cfg.trials_per_n;
    const auto file = params_file_name(n, trial);
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + file);
    write_params(out, outcomes[idx]->params);
    lines << outcome_json(*outcomes[idx], file, cfg.record_wall_time).dump() << '\n';
  }
  write_text_file(dir / "samples.jsonl", lines.str());
}

}  // namespace tslab
