#include "tslab/theory.hpp"

#include <cmath>
#include <string>

namespace tslab {
namespace {

std::string widths_str(const NetworkSpec& s) {
  std::string out;
  for (auto w : s.widths()) out += (out.empty() ? "" : ",") + std::to_string(w);
  return out;
}

void require_all(const std::vector<Precondition>& pre, ErrorKind kind, const char* what) {
  std::string failed;
  for (const auto& p : pre)
    if (!p.ok) failed += (failed.empty() ? "" : "; ") + p.name;
  if (!failed.empty()) fail(kind, std::string(what) + " precondition violated: " + failed);
}

// Throws DepthMismatch first when that is the violated check, WidthCondition otherwise.
void require_fcdnn(const std::vector<Precondition>& pre) {
  for (const auto& p : pre)
    if (!p.ok && p.name.rfind("depth", 0) == 0) fail(ErrorKind::DepthMismatch, p.name);
  require_all(pre, ErrorKind::WidthCondition, "fcdnn");
}

// Product W_hi ⋯ W_lo of student weights (1-based, inclusive); identity when lo > hi.
Matrix weight_product(const ParamVector& p, std::size_t lo, std::size_t hi, std::size_t dim_if_empty) {
  Matrix acc = Matrix::identity(dim_if_empty);
  bool first = true;
  for (std::size_t l = lo; l <= hi; ++l) {
    acc = first ? p.weight(l) : matmul(p.weight(l), acc);
    first = false;
  }
  return acc;
}

void fill_uniform(Matrix& m, std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc, SeededRng& rng) {
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) m(r0 + i, c0 + j) = rng.uniform(-kFreeEntryBound, kFreeEntryBound);
}

void copy_block(Matrix& dst, const Matrix& src, std::size_t r0, std::size_t c0) {
  for (std::size_t i = 0; i < src.rows(); ++i)
    for (std::size_t j = 0; j < src.cols(); ++j) dst(r0 + i, c0 + j) = src(i, j);
}

void require_in_box(const ParamVector& p, const DomainBox& box) {
  const double m = max_abs(p.data());
  if (m > box.half_width) {
    fail(ErrorKind::BoxOverflow, "embedded parameter magnitude " + std::to_string(m) + " exceeds box half-width " +
                                     std::to_string(box.half_width));
  }
}

}  // namespace

std::string_view to_string(BoundFamily f) {
  switch (f) {
    case BoundFamily::dlnn: return "dlnn";
    case BoundFamily::fcdnn: return "fcdnn";
    case BoundFamily::generic: return "generic";
  }
  return "generic";
}

BoundReport bound_from_dimension(std::size_t d_theta, std::size_t d_tes_lower) {
  if (d_tes_lower > d_theta) fail(ErrorKind::InvalidConfig, "TES dimension cannot exceed the parameter dimension");
  BoundReport r;
  r.family = BoundFamily::generic;
  r.d_theta = d_theta;
  r.d_tes_lower = d_tes_lower;
  r.k_upper = d_theta - d_tes_lower + 1;
  return r;
}

std::vector<Precondition> dlnn_preconditions(const NetworkSpec& teacher, const NetworkSpec& student) {
  std::vector<Precondition> pre;
  const auto Lt = teacher.depth(), Ls = student.depth();
  pre.push_back({"teacher family dlnn", teacher.family() == Family::dlnn});
  pre.push_back({"student family dlnn", student.family() == Family::dlnn});
  pre.push_back({"depth L >= L* (" + std::to_string(Ls) + " >= " + std::to_string(Lt) + ")", Ls >= Lt});
  pre.push_back({"input dim m0 == m0*", student.input_dim() == teacher.input_dim()});
  pre.push_back({"output dim mL == mL*", student.output_dim() == teacher.output_dim()});
  if (Ls < Lt) return pre;
  for (std::size_t l = 1; l + 1 <= Lt; ++l) {
    pre.push_back({"m_" + std::to_string(l) + " >= m*_" + std::to_string(l), student.width(l) >= teacher.width(l)});
  }
  const auto k = teacher.width(Lt - 1);
  for (std::size_t l = Lt; l + 1 <= Ls; ++l) {
    pre.push_back({"m_" + std::to_string(l) + " >= m*_" + std::to_string(Lt - 1), student.width(l) >= k});
  }
  return pre;
}

std::vector<Precondition> fcdnn_preconditions(const NetworkSpec& teacher, const NetworkSpec& student) {
  std::vector<Precondition> pre;
  const auto Lt = teacher.depth(), Ls = student.depth();
  pre.push_back({"same family", teacher.family() == student.family()});
  pre.push_back({"same activation", teacher.activation() == student.activation()});
  pre.push_back({"depth L == L* (" + std::to_string(Ls) + " vs " + std::to_string(Lt) + ")", Ls == Lt});
  pre.push_back({"input dim m0 == m0*", student.input_dim() == teacher.input_dim()});
  pre.push_back({"output dim mL == mL*", student.output_dim() == teacher.output_dim()});
  if (Ls != Lt) return pre;
  for (std::size_t l = 1; l + 1 <= Ls; ++l) {
    pre.push_back({"m_" + std::to_string(l) + " >= m*_" + std::to_string(l), student.width(l) >= teacher.width(l)});
  }
  return pre;
}

BoundReport bound_dlnn(const NetworkSpec& teacher, const NetworkSpec& student) {
  auto pre = dlnn_preconditions(teacher, student);
  require_all(pre, ErrorKind::WidthCondition, "dlnn");
  const auto d_star = param_count(teacher);
  BoundReport r;
  r.family = BoundFamily::dlnn;
  r.d_theta = param_count(student);
  r.d_tes_lower = r.d_theta - d_star;
  r.k_upper = d_star + 1;
  r.preconditions = std::move(pre);
  return r;
}

namespace {

// Σ_{ℓ=1}^{L} m*_ℓ (m_{ℓ-1} + 1) with student widths m.
std::size_t fcdnn_determined_count(const NetworkSpec& teacher, const NetworkSpec& student) {
  std::size_t s = 0;
  for (std::size_t l = 1; l <= teacher.depth(); ++l) s += teacher.width(l) * (student.width(l - 1) + 1);
  return s;
}

}  // namespace

BoundReport bound_fcdnn(const NetworkSpec& teacher, const NetworkSpec& student) {
  auto pre = fcdnn_preconditions(teacher, student);
  require_fcdnn(pre);
  const auto determined = fcdnn_determined_count(teacher, student);
  BoundReport r;
  r.family = BoundFamily::fcdnn;
  r.d_theta = param_count(student);
  r.d_tes_lower = r.d_theta - determined;
  r.k_upper = determined + 1;
  r.preconditions = std::move(pre);
  return r;
}

// ---------------------------------------------------------------------------

EmbeddingWitness embed_fcdnn(const Teacher& teacher, const NetworkSpec& student, SeededRng rng, const DomainBox& box) {
  const auto& tspec = teacher.spec();
  require_fcdnn(fcdnn_preconditions(tspec, student));
  const auto L = student.depth();
  ParamVector theta(student);
  std::size_t free_count = 0;

  for (std::size_t l = 1; l <= L; ++l) {
    const auto rows = student.width(l), cols = student.width(l - 1);
    const auto trows = tspec.width(l);
    Matrix w(rows, cols);
    copy_block(w, teacher.params.weight(l), 0, 0);  // top-right stays zero
    fill_uniform(w, trows, 0, rows - trows, cols, rng);
    std::vector<double> b(rows, 0.0);
    const Vector tb = teacher.params.bias(l);
    for (std::size_t i = 0; i < trows; ++i) b[i] = tb[i];
    for (std::size_t i = trows; i < rows; ++i) b[i] = rng.uniform(-kFreeEntryBound, kFreeEntryBound);
    free_count += (rows - trows) * (cols + 1);
    theta.set_weight(l, w);
    theta.set_bias(l, b);
  }
  require_in_box(theta, box);
  return EmbeddingWitness{std::move(theta), free_count, {}};
}

EmbeddingWitness embed_dlnn(const Teacher& teacher, const NetworkSpec& student, SeededRng rng, const DomainBox& box) {
  const auto& tspec = teacher.spec();
  require_all(dlnn_preconditions(tspec, student), ErrorKind::WidthCondition, "dlnn");
  const auto Lt = tspec.depth();
  const auto L = student.depth();
  const auto m0 = student.input_dim();

  if (student.widths() == tspec.widths()) {
    return EmbeddingWitness{teacher.params, 0, {}};
  }

  const auto k = tspec.width(Lt - 1);
  ParamVector theta(student);
  std::vector<Matrix> regular;
  std::size_t free_count = 0;

  // Layers below the teacher's output layer copy the teacher block.
  for (std::size_t l = 1; l < Lt; ++l) {
    const auto rows = student.width(l), cols = student.width(l - 1);
    const auto trows = tspec.width(l), tcols = tspec.width(l - 1);
    Matrix w(rows, cols);
    copy_block(w, teacher.params.weight(l), 0, 0);
    fill_uniform(w, 0, tcols, trows, cols - tcols, rng);
    fill_uniform(w, trows, 0, rows - trows, cols, rng);
    std::vector<double> b(rows);
    const Vector tb = teacher.params.bias(l);
    for (std::size_t i = 0; i < rows; ++i) b[i] = i < trows ? tb[i] : rng.uniform(-kFreeEntryBound, kFreeEntryBound);
    free_count += rows * (cols + 1) - trows * (tcols + 1);
    theta.set_weight(l, w);
    theta.set_bias(l, b);
  }

  // Pass-through layers carry P·h* in their first k units.
  Matrix p = Matrix::identity(k);
  for (std::size_t l = Lt; l < L; ++l) {
    const auto rows = student.width(l), cols = student.width(l - 1);
    Matrix w(rows, cols);
    Matrix r = random_regular(k, rng, kRegularMinSingular);
    copy_block(w, r, 0, 0);
    fill_uniform(w, 0, k, k, cols - k, rng);
    fill_uniform(w, k, 0, rows - k, cols, rng);
    std::vector<double> b(rows);
    for (double& v : b) v = rng.uniform(-kFreeEntryBound, kFreeEntryBound);
    free_count += rows * (cols + 1);
    p = matmul(r, p);
    regular.push_back(std::move(r));
    theta.set_weight(l, w);
    theta.set_bias(l, b);
  }

  // Output layer: [W*_{L*} P⁻¹, M], bias fixed below.
  {
    const auto rows = student.width(L), cols = student.width(L - 1);
    Matrix w(rows, cols);
    copy_block(w, matmul(teacher.params.weight(Lt), solve_or_invert(p)), 0, 0);
    fill_uniform(w, 0, k, rows, cols - k, rng);
    free_count += rows * (cols - k);
    theta.set_weight(L, w);
  }

  // Cancel the linear leakage of the redundant units. Everything is affine in
  // x, so f_student(x) = A x + c with A = W_L ⋯ W_1.
  const Matrix a_teacher = weight_product(teacher.params, 1, Lt, m0);
  const Matrix a_student = weight_product(theta, 1, L, m0);
  const Matrix leak = subtract(a_teacher, a_student);
  const double scale = std::max(1.0, max_abs(a_teacher.data()));
  if (max_abs(leak.data()) > 1e-14 * scale) {
    bool absorbed = false;
    // Route 1: V ← V + E U⁺ where U maps x to the first k units at layer L-1.
    try {
      const Matrix u = weight_product(theta, 1, L - 1, m0).block(0, 0, k, m0);
      if (k >= m0) {
        const Matrix delta = matmul(leak, left_pseudo_inverse(u));
        Matrix w = theta.weight(L);
        for (std::size_t i = 0; i < delta.rows(); ++i)
          for (std::size_t j = 0; j < k; ++j) w(i, j) += delta(i, j);
        theta.set_weight(L, w);
        absorbed = true;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularMatrix) throw;
    }
    // Route 2: W_1 teacher rows ← + G⁺ E where G maps those rows to the output.
    if (!absorbed && Lt >= 2) {
      const auto t1 = tspec.width(1);
      try {
        const Matrix g = weight_product(theta, 2, L, student.width(1)).block(0, 0, student.output_dim(), t1);
        if (t1 >= student.output_dim()) {
          const Matrix delta = matmul(right_pseudo_inverse(g), leak);
          Matrix w = theta.weight(1);
          for (std::size_t i = 0; i < t1; ++i)
            for (std::size_t j = 0; j < m0; ++j) w(i, j) += delta(i, j);
          theta.set_weight(1, w);
          absorbed = true;
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::SingularMatrix) throw;
      }
    }
    if (!absorbed) {
      fail(ErrorKind::RankDeficient, "redundant-unit leakage cannot be cancelled for teacher " + widths_str(tspec) +
                                         " and student " + widths_str(student));
    }
  }

  // Constant part: b_L ← b_L + (c* − c_student).
  {
    const std::vector<double> zero(m0, 0.0);
    const Vector c_teacher = forward(teacher.params, zero);
    const Vector c_student = forward(theta, zero);
    std::vector<double> b(student.output_dim());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = c_teacher[i] - c_student[i];
    theta.set_bias(L, b);
  }

  require_in_box(theta, box);
  return EmbeddingWitness{std::move(theta), free_count, std::move(regular)};
}

ParamVector sample_tes_point(const Teacher& teacher, const NetworkSpec& student, SeededRng rng, const DomainBox& box) {
  if (student.family() == Family::dlnn) return embed_dlnn(teacher, student, rng, box).student_params;
  return embed_fcdnn(teacher, student, rng, box).student_params;
}

double equivalence_residual(const ParamVector& student, const Teacher& teacher, std::size_t n_inputs,
                            const InputBox& input_box, SeededRng rng) {
  Evaluator fs(student.spec());
  Evaluator ft(teacher.spec());
  std::vector<double> x(student.spec().input_dim());
  std::vector<double> yt(student.spec().output_dim());
  double worst = 0.0;
  for (std::size_t i = 0; i < n_inputs; ++i) {
    for (double& v : x) v = rng.uniform(input_box.lo, input_box.hi);
    auto t = ft.forward(teacher.params.data(), x);
    std::copy(t.begin(), t.end(), yt.begin());
    auto s = fs.forward(student.data(), x);
    double sq = 0.0;
    for (std::size_t k = 0; k < yt.size(); ++k) sq += (s[k] - yt[k]) * (s[k] - yt[k]);
    worst = std::max(worst, std::sqrt(sq));
  }
  return worst;
}

}  // namespace tslab
