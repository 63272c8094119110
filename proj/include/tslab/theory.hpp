#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tslab/data.hpp"
#include "tslab/linalg.hpp"
#include "tslab/network.hpp"

namespace tslab {

enum class BoundFamily { dlnn, fcdnn, generic };
std::string_view to_string(BoundFamily f);

struct Precondition {
  std::string name;
  bool ok = false;
};

/// Strong-sample-complexity bound k ≤ d_Θ − d_TES + 1, in exact integers.
struct BoundReport {
  BoundFamily family = BoundFamily::generic;
  std::size_t d_theta = 0;
  std::size_t d_tes_lower = 0;
  std::size_t k_upper = 0;
  std::vector<Precondition> preconditions;
};

/// General bound from a known TES dimension lower bound (d_tes_lower ≤ d_theta).
BoundReport bound_from_dimension(std::size_t d_theta, std::size_t d_tes_lower);

/// Teacher-vs-student admissibility checks for the deep linear construction:
/// L ≥ L*, equal input/output dims, m_ℓ ≥ m*_ℓ below L*, m_ℓ ≥ m*_{L*-1} from L* on.
std::vector<Precondition> dlnn_preconditions(const NetworkSpec& teacher, const NetworkSpec& student);
/// Same family and activation, L == L*, equal input/output dims, m_ℓ ≥ m*_ℓ.
std::vector<Precondition> fcdnn_preconditions(const NetworkSpec& teacher, const NetworkSpec& student);

/// k_upper = d* + 1, independent of the student's depth and width.
BoundReport bound_dlnn(const NetworkSpec& teacher, const NetworkSpec& student);
/// k_upper = Σ_{ℓ=1}^{L} m*_ℓ (m_{ℓ-1} + 1) + 1 with the student's m_{ℓ-1}.
BoundReport bound_fcdnn(const NetworkSpec& teacher, const NetworkSpec& student);

/// A teacher-equivalent student parameter plus the size of its free part.
struct EmbeddingWitness {
  ParamVector student_params;
  std::size_t free_dimension = 0;
  std::vector<Matrix> regular_blocks;
};

/// Entries of free blocks are uniform on [-1, 1]; regular blocks use this floor.
inline constexpr double kFreeEntryBound = 1.0;
inline constexpr double kRegularMinSingular = 0.1;

/// Embeds a deep linear teacher into a deeper/wider deep linear student.
///
/// Layout per student layer ℓ (teacher depth L*, k = m*_{L*-1}):
///   ℓ < L*        W = [[W*_ℓ, M], [M, M]],  b = [b*_ℓ; M]
///   L* ≤ ℓ < L    W = [[R_ℓ, M], [M, M]],   b = [M; M],  R_ℓ k×k regular
///   ℓ = L         W = [V, M],                b determined
/// with V = W*_{L*} P⁻¹ (P = R_{L-1}⋯R_{L*}) plus a correction that cancels the
/// affine leakage of the redundant units, and b fixed so the constant terms
/// agree. The free part has d_Θ − d* entries. When the leakage cannot be
/// absorbed by V (the first k units at layer L-1 do not span the input), the
/// first-layer teacher block absorbs it instead; if neither works the call
/// fails with RankDeficient.
EmbeddingWitness embed_dlnn(const Teacher& teacher, const NetworkSpec& student, SeededRng rng, const DomainBox& box);

/// Embeds an FCDNN teacher into an equally deep, wider FCDNN student:
///   ℓ < L   W = [[W*_ℓ, 0], [M, M]],  b = [b*_ℓ; M]
///   ℓ = L   W = [W*_L, 0],            b = b*_L
/// Equivalence is exact up to rounding.
EmbeddingWitness embed_fcdnn(const Teacher& teacher, const NetworkSpec& student, SeededRng rng, const DomainBox& box);

/// Random point of the constructed teacher-equivalent subset, dispatching on
/// the student's family.
ParamVector sample_tes_point(const Teacher& teacher, const NetworkSpec& student, SeededRng rng, const DomainBox& box);

/// max over n_inputs inputs (uniform on the box) of ‖f_student(x) − f_teacher(x)‖₂.
double equivalence_residual(const ParamVector& student, const Teacher& teacher, std::size_t n_inputs,
                            const InputBox& input_box, SeededRng rng);

}  // namespace tslab
