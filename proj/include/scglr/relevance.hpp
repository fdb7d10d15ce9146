#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "scglr/kernels.hpp"

namespace scglr {

// Below this value the structural-relevance and goodness-of-fit factors
// are treated as degenerate (their logs are undefined).
inline constexpr double kCriterionFloor = 1e-10;

// Evaluates the component-construction criterion
//   J(u) = s * log phi(u) + (1 - s) * log psi(u)
// and its gradient over loadings u expressed in the coordinates of the
// working basis C (principal components of X, or X itself).
//
//   phi(u) = [ sum_j omega_j <Cu, x_j>_P^(2l) ]^(1/l)
// pulls the component towards bundles of correlated predictors (l = 1:
// closest to the first principal component; large l: locks onto single
// variables), while
//   psi(u) = sum_k || z_k ||^2_{W_k} cos^2_{W_k}(z_k, span{Cu, A})
// measures the weighted fit of every linearised response on the span of
// the candidate component and the fixed columns A (previous components
// and extra covariates).
//
// Geometry (C, X, P, omega, l, s) is fixed at construction; per-pass
// state (A, working variables and weights) is refreshed with
// set_extraction_state.  All evaluations run in r-dimensional reduced
// coordinates against precomputed cross-products, so a single call costs
// O(p r + q (r + m)^2) regardless of n.
class CriterionContext {
 public:
  CriterionContext(const Mat& C, const Mat& X, const Vec& p_weights,
                   Vec omega, double l, double s, Exec exec = Exec::Parallel);

  // Refreshes the fixed columns A (may have zero columns) and the
  // per-response working vectors z_k with weight diagonals w_k.
  void set_extraction_state(const Mat& A, const std::vector<Vec>& z,
                            const std::vector<Vec>& w);

  double s() const { return s_; }
  double l() const { return l_; }
  int reduced_dim() const { return static_cast<int>(C_.cols()); }

  // phi(u); returns 0 for u in the kernel of every <Cu, x_j>_P.
  double structural_relevance(const Vec& u) const;
  // grad of log phi; errors when phi is degenerate.
  Vec structural_relevance_log_grad(const Vec& u) const;

  // psi(u), production route (reduced coordinates).
  double goodness_of_fit(const Vec& u) const;
  // psi(u) recomputed from scratch in observation space via weighted
  // projections; kept as the reference implementation for tests and the
  // benchmark.
  double goodness_of_fit_reference(const Vec& u) const;
  // psi for the span of A alone (no component); the baseline for
  // early-stopping on the goodness-of-fit gain.
  double goodness_of_fit_baseline() const;

  // J(u); throws NumericalError when a needed factor is degenerate.
  double combined(const Vec& u) const;
  // J(u) and its gradient in one pass (shares the projection solves).
  std::pair<double, Vec> combined_with_grad(const Vec& u) const;

  // phi(u) recomputed in observation space (reference path).
  double structural_relevance_reference(const Vec& u) const;

 private:
  struct ResponseBlocks {
    Mat R;      // C' W C        (r x r)
    Mat N;      // C' W A        (r x m)
    Mat M;      // A' W A        (m x m)
    Vec t;      // C' W z        (r)
    Vec sz;     // A' W z        (m)
    double zwz = 0.0;
  };

  double psi_one(const ResponseBlocks& b, const Vec& u, Vec* grad) const;

  Mat C_;              // n x r working basis
  Mat X_;              // n x p original predictors
  Vec p_weights_;      // observation metric diagonal
  Vec omega_;          // variable weights, sum 1
  double l_ = 1.0;
  double s_ = 0.5;
  Exec exec_ = Exec::Parallel;

  Mat S_;              // X' P C  (p x r): <Cu, x_j>_P = (S u)_j

  // extraction state
  Mat A_;
  std::vector<Vec> z_, w_;
  std::vector<ResponseBlocks> blocks_;
  bool state_set_ = false;
};

// Central finite-difference gradient of a scalar function on R^r; used
// to certify analytic gradients.
template <typename F>
Vec fd_gradient(F&& f, const Vec& u, double h = 1e-6) {
  Vec g(u.size());
  Vec up = u;
  for (int i = 0; i < u.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(u[i]));
    up[i] = u[i] + step;
    const double fp = f(up);
    up[i] = u[i] - step;
    const double fm = f(up);
    up[i] = u[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace scglr
