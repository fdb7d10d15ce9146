#include "scglr/linmix.hpp"

#include <cmath>
#include <string>

#include "scglr/errors.hpp"

namespace scglr {

void GroupDesign::validate() const {
  if (n_groups <= 0) throw UserError("grouping needs at least one group");
  std::vector<bool> seen(n_groups, false);
  for (int i = 0; i < n(); ++i) {
    const int g = group_of[i];
    if (g < 0 || g >= n_groups)
      throw UserError("group index out of range at row " + std::to_string(i));
    seen[g] = true;
  }
  for (int g = 0; g < n_groups; ++g)
    if (!seen[g])
      throw UserError("group " + std::to_string(g) + " has no observations");
}

Vec GroupDesign::group_weight_sums(const Vec& w) const {
  Vec out = Vec::Zero(n_groups);
  for (int i = 0; i < n(); ++i) out[group_of[i]] += w[i];
  return out;
}

Vec GroupDesign::weighted_group_sums(const Vec& w, const Vec& z) const {
  Vec out = Vec::Zero(n_groups);
  for (int i = 0; i < n(); ++i) out[group_of[i]] += w[i] * z[i];
  return out;
}

Mat GroupDesign::weighted_cross_groups(const Vec& w, const Mat& B) const {
  Mat out = Mat::Zero(n_groups, B.cols());
  for (int i = 0; i < n(); ++i) out.row(group_of[i]) += w[i] * B.row(i);
  return out;
}

Vec GroupDesign::expand(const Vec& xi) const {
  Vec out(n());
  for (int i = 0; i < n(); ++i) out[i] = xi[group_of[i]];
  return out;
}

std::vector<int> GroupDesign::sizes() const {
  std::vector<int> out(n_groups, 0);
  for (int i = 0; i < n(); ++i) ++out[group_of[i]];
  return out;
}

namespace {

// LDLT solve with one jittered retry; `what` labels the failure.
Vec solve_spd(Mat G, const Vec& rhs, const std::string& what) {
  Eigen::LDLT<Mat> ldlt(G);
  Vec sol = ldlt.solve(rhs);
  const double scale = std::max(rhs.norm(), 1.0);
  if (ldlt.info() == Eigen::Success && (G * sol - rhs).norm() <= 1e-8 * scale)
    return sol;
  const double jitter = kJitterScale * G.diagonal().mean();
  G.diagonal().array() += jitter;
  Eigen::LDLT<Mat> retry(G);
  sol = retry.solve(rhs);
  if (retry.info() == Eigen::Success && (G * sol - rhs).norm() <= 1e-6 * scale)
    return sol;
  Eigen::JacobiSVD<Mat> svd(G);
  const double cond =
      svd.singularValues()(0) /
      std::max(svd.singularValues()(svd.singularValues().size() - 1), 1e-300);
  throw NumericalError(what + ": normal matrix is numerically singular " +
                       "(condition estimate " + std::to_string(cond) + ")");
}

}  // namespace

ProjectionResult weighted_projection(const Mat& basis, const Vec& w,
                                     const Vec& target, Exec exec) {
  if (basis.rows() != w.size() || basis.rows() != target.size())
    throw UserError("weighted_projection: row counts disagree");
  const Mat G = weighted_gram(basis, w, exec);
  const Vec rhs = weighted_cross(basis, w, target, exec);
  ProjectionResult out;
  out.coef = solve_spd(G, rhs, "weighted projection");
  out.fitted = basis * out.coef;
  return out;
}

HendersonSolution solve_henderson(const Mat& basis, const GroupDesign& groups,
                                  const Vec& w, double sigma2, const Vec& z,
                                  Exec exec) {
  const int n = static_cast<int>(basis.rows());
  if (groups.n() != n || w.size() != n || z.size() != n)
    throw UserError("solve_henderson: row counts disagree");
  if (!(sigma2 > 0.0))
    throw UserError("solve_henderson: group variance must be positive");

  // S = U'WU + I/s2 is diagonal; eliminate xi first.
  const Vec s = groups.group_weight_sums(w).array() + 1.0 / sigma2;
  const Vec uz = groups.weighted_group_sums(w, z);

  HendersonSolution out;
  const int m = static_cast<int>(basis.cols());
  if (m == 0) {
    out.coef = Vec();
    out.xi = uz.array() / s.array();
    return out;
  }

  const Mat ub = groups.weighted_cross_groups(w, basis);  // N x m
  Mat G = weighted_gram(basis, w, exec);
  G.noalias() -= ub.transpose() * (ub.array().colwise() / s.array()).matrix();
  Vec rhs = weighted_cross(basis, w, z, exec);
  rhs.noalias() -= ub.transpose() * (uz.array() / s.array()).matrix();

  out.coef = solve_spd(G, rhs, "henderson system");
  out.xi = (uz - ub * out.coef).array() / s.array();
  return out;
}

double group_shrinkage_trace(const GroupDesign& groups, const Vec& w,
                             double sigma2) {
  const Vec s = groups.group_weight_sums(w).array() + 1.0 / sigma2;
  return (1.0 / s.array()).sum();
}

double update_variance(const Vec& xi, double sigma2_old,
                       const GroupDesign& groups, const Vec& w) {
  const int N = groups.n_groups;
  if (xi.size() != N) throw UserError("update_variance: xi has wrong length");
  if (!(sigma2_old > 0.0))
    throw UserError("update_variance: current variance must be positive");
  const double ss = xi.squaredNorm();
  if (ss < 1e-300) return kVarianceFloor;
  const double trace = group_shrinkage_trace(groups, w, sigma2_old);
  const double denom = N - trace / sigma2_old;
  if (!(denom > 0.0))
    throw VarianceCollapse(
        "variance update denominator non-positive (N = " + std::to_string(N) +
        ", trace/s2 = " + std::to_string(trace / sigma2_old) + ")");
  return std::max(ss / denom, kVarianceFloor);
}

PcaReduction pca_reduce(const Mat& X, const Vec& p_weights, Exec exec) {
  return eigen_basis(X, p_weights, true, exec);
}

PcaReduction eigen_basis(const Mat& X, const Vec& p_weights,
                         bool threshold_rule, Exec exec) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (p_weights.size() != n) throw UserError("pca_reduce: metric length != n");

  for (int j = 0; j < p; ++j) {
    const double mean = X.col(j).mean();
    if (std::abs(mean) > 1e-6)
      throw UserError("pca_reduce: column " + std::to_string(j) +
                      " is not centred (mean " + std::to_string(mean) + ")");
    const double norm2 = (p_weights.array() * X.col(j).array().square()).sum();
    if (norm2 < 1e-12)
      throw UserError("pca_reduce: column " + std::to_string(j) +
                      " has zero variance");
    if (std::abs(norm2 - 1.0) > 1e-6)
      throw UserError("pca_reduce: column " + std::to_string(j) +
                      " is not standardised (P-norm^2 " + std::to_string(norm2) +
                      ")");
  }

  const Mat G = weighted_gram(X, p_weights, exec);
  Eigen::SelfAdjointEigenSolver<Mat> eig(G);
  if (eig.info() != Eigen::Success)
    throw NumericalError("pca_reduce: eigendecomposition failed");

  // Eigen returns ascending order; walk from the top with the retention
  // rule.  Ties with the threshold (all-equal spectra) are kept.
  const int cap = std::min(n - 1, p);
  const double lam_max = eig.eigenvalues()(p - 1);
  double cumsum = 0.0;
  int r = 0;
  for (int j = 0; j < p && r < cap; ++j) {
    const double lambda = eig.eigenvalues()(p - 1 - j);
    if (lambda <= std::max(1e-12, 1e-10 * lam_max)) break;
    cumsum += lambda;
    if (threshold_rule && lambda / cumsum < 1.0 / p - 1e-12) break;
    ++r;
  }
  if (r == 0) throw NumericalError("pca_reduce: no retainable eigenvalue");

  PcaReduction red;
  red.rank = r;
  red.V.resize(p, r);
  red.eigvals.resize(r);
  for (int j = 0; j < r; ++j) {
    red.V.col(j) = eig.eigenvectors().col(p - 1 - j);
    red.eigvals[j] = eig.eigenvalues()(p - 1 - j);
    // Deterministic orientation: largest-magnitude loading positive.
    int imax = 0;
    red.V.col(j).cwiseAbs().maxCoeff(&imax);
    if (red.V(imax, j) < 0.0) red.V.col(j) = -red.V.col(j);
  }
  red.C = X * red.V;
  return red;
}

Vec original_loadings(const PcaReduction& red, const Vec& u) {
  return red.V * u;
}

}  // namespace scglr
