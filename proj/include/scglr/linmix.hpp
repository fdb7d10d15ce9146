#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scglr/kernels.hpp"

namespace scglr {

// Lower bound for any estimated group variance.
inline constexpr double kVarianceFloor = 1e-8;
// Diagonal jitter of last resort, relative to the mean diagonal, applied
// only when a fixed-effect block fails to factorise.
inline constexpr double kJitterScale = 1e-10;

// Group membership for a random intercept per group.  The indicator
// matrix U (n x N) is never materialised; every product that involves it
// is computed from the membership vector.
struct GroupDesign {
  std::vector<int> group_of;  // size n, values in [0, n_groups)
  int n_groups = 0;

  int n() const { return static_cast<int>(group_of.size()); }
  void validate() const;

  // diag(U' diag(w) U): per-group sums of w.
  Vec group_weight_sums(const Vec& w) const;
  // U' (w .* z): per-group sums of w_i z_i.
  Vec weighted_group_sums(const Vec& w, const Vec& z) const;
  // U' diag(w) B, N x m.
  Mat weighted_cross_groups(const Vec& w, const Mat& B) const;
  // U xi: broadcast each group's value to its rows.
  Vec expand(const Vec& xi) const;
  // Group sizes.
  std::vector<int> sizes() const;
};

struct ProjectionResult {
  Vec coef;    // basis coefficients
  Vec fitted;  // basis * coef
};

// W-orthogonal projection of `target` onto the columns of `basis`:
// solves (B'WB) c = B'W t.  Singular normal matrices get one jitter
// retry before failing.
ProjectionResult weighted_projection(const Mat& basis, const Vec& w,
                                     const Vec& target, Exec exec = Exec::Serial);

struct HendersonSolution {
  Vec coef;  // fixed-effect coefficients, one per basis column
  Vec xi;    // predicted group effects, length N
};

// Henderson system for one response,
//   [ B'WB   B'WU        ] [coef]   [B'Wz]
//   [ U'WB   U'WU + I/s2 ] [xi  ] = [U'Wz],
// solved by eliminating the (diagonal) group block.  `basis` holds every
// fixed-effect column (component(s), covariates, intercept).
HendersonSolution solve_henderson(const Mat& basis, const GroupDesign& groups,
                                  const Vec& w, double sigma2, const Vec& z,
                                  Exec exec = Exec::Serial);

// One variance-component step:
//   s2_new = xi'xi / (N - (1/s2_old) * Tr[(U'WU + I/s2_old)^-1]).
// Throws VarianceCollapse when the denominator is non-positive; returns
// the floor when xi is numerically zero.  Result is floored at
// kVarianceFloor.
double update_variance(const Vec& xi, double sigma2_old,
                       const GroupDesign& groups, const Vec& w);

// Trace term of the update above; also the group-block contribution to
// the effective degrees of freedom (as N - (1/s2) * trace).
double group_shrinkage_trace(const GroupDesign& groups, const Vec& w,
                             double sigma2);

struct PcaReduction {
  Mat C;        // n x r principal-component scores X V
  Mat V;        // p x r loadings (orthonormal columns)
  Vec eigvals;  // leading r eigenvalues of X'PX, descending
  int rank = 0;
};

// Replaces X by its leading principal components under the observation
// metric P (given by its diagonal `p_weights`).  Eigenpairs of X'PX are
// kept while lambda_r / sum_{j<=r} lambda_j >= 1/p (the tail of the rule
// marks the numerically-zero spectrum), capped at min(n-1, p).  Columns
// must arrive centred and standardised (checked to 1e-6).
PcaReduction pca_reduce(const Mat& X, const Vec& p_weights,
                        Exec exec = Exec::Serial);

// Shared eigenbasis builder behind pca_reduce: with the threshold rule
// disabled, every numerically non-zero eigenpair is kept (a pure
// rotation for full-column-rank X).
PcaReduction eigen_basis(const Mat& X, const Vec& p_weights,
                         bool threshold_rule, Exec exec = Exec::Serial);

// Minimum-norm map back to original coordinates: u_tilde = V u.
Vec original_loadings(const PcaReduction& red, const Vec& u);

}  // namespace scglr
