#include "tslab/data.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tslab/format.hpp"

namespace tslab {

Teacher make_teacher(const NetworkSpec& spec, SeededRng rng) { return Teacher{xavier_uniform(spec, rng)}; }

Dataset sample_dataset(const Teacher& teacher, std::size_t n, const InputBox& input_box, SeededRng rng) {
  if (n == 0) fail(ErrorKind::InvalidConfig, "dataset size must be at least 1");
  const auto& spec = teacher.spec();
  Matrix inputs(n, spec.input_dim());
  Matrix outputs(n, spec.output_dim());
  Evaluator ev(spec);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = inputs.row(i);
    for (double& v : x) v = rng.uniform(input_box.lo, input_box.hi);
    auto y = ev.forward(teacher.params.data(), x);
    std::copy(y.begin(), y.end(), outputs.row(i).begin());
  }
  return Dataset{std::move(inputs), std::move(outputs), rng.stream_id()};
}

double train_loss(const ParamVector& params, const Dataset& data) {
  Evaluator ev(params.spec());
  return ev.loss(params.data(), data);
}

double test_loss(const ParamVector& params, const Teacher& teacher, std::size_t n_test, const InputBox& input_box,
                 SeededRng rng) {
  if (n_test == 0) fail(ErrorKind::InvalidConfig, "n_test must be at least 1");
  if (params.spec().input_dim() != teacher.spec().input_dim() ||
      params.spec().output_dim() != teacher.spec().output_dim()) {
    fail(ErrorKind::DimensionMismatch, "student and teacher disagree on input/output dimension");
  }
  Evaluator student(params.spec());
  Evaluator ref(teacher.spec());
  std::vector<double> x(params.spec().input_dim());
  std::vector<double> y(params.spec().output_dim());
  double total = 0.0;
  for (std::size_t i = 0; i < n_test; ++i) {
    for (double& v : x) v = rng.uniform(input_box.lo, input_box.hi);
    auto t = ref.forward(teacher.params.data(), x);
    std::copy(t.begin(), t.end(), y.begin());
    auto f = student.forward(params.data(), x);
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) s += (f[k] - y[k]) * (f[k] - y[k]);
    total += 0.5 * s;
  }
  const double l = total / static_cast<double>(n_test);
  if (!std::isfinite(l)) fail(ErrorKind::NonFiniteLoss, "test loss is not finite");
  return l;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.input_dim(); ++j) out << (j ? "," : "") << "x_" << j;
  for (std::size_t j = 0; j < data.output_dim(); ++j) out << ",y_" << j;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    bool first = true;
    for (double v : data.inputs.row(i)) {
      out << (first ? "" : ",") << fmt17(v);
      first = false;
    }
    for (double v : data.outputs.row(i)) out << ',' << fmt17(v);
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, "empty dataset file");
  std::size_t nx = 0, ny = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      if (col.rfind("x_", 0) == 0) {
        if (ny) fail(ErrorKind::ParseError, "input column after output column");
        ++nx;
      } else if (col.rfind("y_", 0) == 0) {
        ++ny;
      } else {
        fail(ErrorKind::ParseError, "unexpected column '" + col + "'");
      }
    }
  }
  if (nx == 0 || ny == 0) fail(ErrorKind::ParseError, "dataset header needs x_ and y_ columns");
  std::vector<double> xs, ys;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      double v;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        fail(ErrorKind::ParseError, "bad number '" + cell + "' on data row " + std::to_string(rows + 1));
      }
      (c < nx ? xs : ys).push_back(v);
      ++c;
    }
    if (c != nx + ny) fail(ErrorKind::ParseError, "row " + std::to_string(rows + 1) + " has wrong column count");
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::ParseError, "dataset has no rows");
  return Dataset{Matrix(rows, nx, std::move(xs)), Matrix(rows, ny, std::move(ys)), 0};
}

}  // namespace tslab
