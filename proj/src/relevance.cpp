#include "scglr/relevance.hpp"

#include <cmath>
#include <string>

#include "scglr/errors.hpp"
#include "scglr/linmix.hpp"

namespace scglr {

CriterionContext::CriterionContext(const Mat& C, const Mat& X,
                                   const Vec& p_weights, Vec omega, double l,
                                   double s, Exec exec)
    : C_(C), X_(X), p_weights_(p_weights), omega_(std::move(omega)), l_(l),
      s_(s), exec_(exec) {
  if (C_.rows() != X_.rows() || C_.rows() != p_weights_.size())
    throw UserError("criterion: row counts disagree");
  if (l_ < 1.0) throw UserError("criterion: l must be >= 1");
  if (s_ < 0.0 || s_ > 1.0) throw UserError("criterion: s must lie in [0, 1]");
  if (omega_.size() == 0)
    omega_ = Vec::Constant(X_.cols(), 1.0 / static_cast<double>(X_.cols()));
  if (omega_.size() != X_.cols())
    throw UserError("criterion: omega length != number of predictors");
  const double total = omega_.sum();
  if (!(total > 0.0)) throw UserError("criterion: omega must sum to > 0");
  omega_ /= total;
  S_ = weighted_cross(X_, p_weights_, C_, exec_);  // p x r
}

void CriterionContext::set_extraction_state(const Mat& A,
                                            const std::vector<Vec>& z,
                                            const std::vector<Vec>& w) {
  if (z.size() != w.size())
    throw UserError("criterion: one weight vector per working vector needed");
  A_ = A;
  z_ = z;
  w_ = w;
  const int q = static_cast<int>(z_.size());
  blocks_.assign(q, ResponseBlocks{});
  for (int k = 0; k < q; ++k) {
    if (z_[k].size() != C_.rows() || w_[k].size() != C_.rows())
      throw UserError("criterion: working vector length != n");
    ResponseBlocks& b = blocks_[k];
    b.R = weighted_gram(C_, w_[k], exec_);
    b.t = weighted_cross(C_, w_[k], z_[k], exec_);
    b.zwz = weighted_dot(z_[k], w_[k], z_[k], exec_);
    if (A_.cols() > 0) {
      b.N = weighted_cross(C_, w_[k], A_, exec_);
      b.M = weighted_gram(A_, w_[k], exec_);
      b.sz = weighted_cross(A_, w_[k], z_[k], exec_);
    } else {
      b.N = Mat(C_.cols(), 0);
      b.M = Mat(0, 0);
      b.sz = Vec(0);
    }
  }
  state_set_ = true;
}

double CriterionContext::structural_relevance(const Vec& u) const {
  const int p = static_cast<int>(S_.rows());
  const Vec inner = S_ * u;
  if (exec_ == Exec::Serial) {
    double total = 0.0;
    for (int j = 0; j < p; ++j)
      total += omega_[j] * std::pow(inner[j] * inner[j], l_);
    return std::pow(total, 1.0 / l_);
  }
  const int nc = (p + kChunkRows - 1) / kChunkRows;
  std::vector<double> partial(nc, 0.0);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c) {
    const int lo = c * kChunkRows;
    const int hi = std::min(lo + kChunkRows, p);
    double acc = 0.0;
    for (int j = lo; j < hi; ++j)
      acc += omega_[j] * std::pow(inner[j] * inner[j], l_);
    partial[c] = acc;
  }
  double total = 0.0;
  for (int c = 0; c < nc; ++c) total += partial[c];
  return std::pow(total, 1.0 / l_);
}

double CriterionContext::structural_relevance_reference(const Vec& u) const {
  const Vec f = C_ * u;
  double total = 0.0;
  for (int j = 0; j < X_.cols(); ++j) {
    const double ip = (p_weights_.array() * X_.col(j).array() * f.array()).sum();
    total += omega_[j] * std::pow(ip * ip, l_);
  }
  return std::pow(total, 1.0 / l_);
}

Vec CriterionContext::structural_relevance_log_grad(const Vec& u) const {
  const int p = static_cast<int>(S_.rows());
  const int r = static_cast<int>(S_.cols());
  const Vec inner = S_ * u;

  // grad log phi = (2 / T) sum_j omega_j inner_j^(2l - 1) S_j
  // with T = sum_j omega_j inner_j^(2l).
  double total = 0.0;
  Vec acc = Vec::Zero(r);
  if (exec_ == Exec::Serial) {
    for (int j = 0; j < p; ++j) {
      const double i2 = inner[j] * inner[j];
      const double pw = std::pow(i2, l_ - 1.0);
      total += omega_[j] * pw * i2;
      acc += (omega_[j] * pw * inner[j]) * S_.row(j).transpose();
    }
  } else {
    const int nc = (p + kChunkRows - 1) / kChunkRows;
    std::vector<double> pt(nc, 0.0);
    std::vector<Vec> pa(nc);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nc; ++c) {
      const int lo = c * kChunkRows;
      const int hi = std::min(lo + kChunkRows, p);
      double t = 0.0;
      Vec a = Vec::Zero(r);
      for (int j = lo; j < hi; ++j) {
        const double i2 = inner[j] * inner[j];
        const double pw = std::pow(i2, l_ - 1.0);
        t += omega_[j] * pw * i2;
        a += (omega_[j] * pw * inner[j]) * S_.row(j).transpose();
      }
      pt[c] = t;
      pa[c] = std::move(a);
    }
    for (int c = 0; c < nc; ++c) {
      total += pt[c];
      acc += pa[c];
    }
  }
  // total = phi^l; test degeneracy on the phi scale so the guard agrees with
  // the value check for every exponent (an l-th power of a small but healthy
  // criterion value is not degenerate).
  if (std::pow(total, 1.0 / l_) < kCriterionFloor)
    throw NumericalError("structural relevance is degenerate at this loading");
  return (2.0 / total) * acc;
}

double CriterionContext::psi_one(const ResponseBlocks& b, const Vec& u,
                                 Vec* grad) const {
  const int m = static_cast<int>(b.M.rows());
  const Vec a = b.R * u;          // C'W C u
  const double fwf = u.dot(a);
  const double fwz = u.dot(b.t);

  Mat G(1 + m, 1 + m);
  G(0, 0) = fwf;
  Vec rhs(1 + m);
  rhs[0] = fwz;
  if (m > 0) {
    const Vec fwA = b.N.transpose() * u;  // A'W f
    G.block(0, 1, 1, m) = fwA.transpose();
    G.block(1, 0, m, 1) = fwA;
    G.block(1, 1, m, m) = b.M;
    rhs.segment(1, m) = b.sz;
  }

  Eigen::LDLT<Mat> ldlt(G);
  Vec c = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !c.allFinite()) {
    Mat Gj = G;
    Gj.diagonal().array() += kJitterScale * std::max(G.diagonal().mean(), 1.0);
    c = Eigen::LDLT<Mat>(Gj).solve(rhs);
    if (!c.allFinite())
      throw NumericalError("goodness of fit: projection system is singular");
  }
  const double psi = rhs.dot(c);
  if (grad) {
    // d psi / d u = 2 c_0 C' W (z - [f A] c), in reduced coordinates.
    Vec res = b.t - a * c[0];
    if (m > 0) res.noalias() -= b.N * c.segment(1, m);
    *grad = (2.0 * c[0]) * res;
  }
  return psi;
}

double CriterionContext::goodness_of_fit(const Vec& u) const {
  if (!state_set_) throw UserError("criterion: extraction state not set");
  double total = 0.0;
  for (const auto& b : blocks_) total += psi_one(b, u, nullptr);
  return total;
}

double CriterionContext::goodness_of_fit_reference(const Vec& u) const {
  if (!state_set_) throw UserError("criterion: extraction state not set");
  const Vec f = C_ * u;
  Mat basis(C_.rows(), 1 + A_.cols());
  basis.col(0) = f;
  if (A_.cols() > 0) basis.rightCols(A_.cols()) = A_;
  double total = 0.0;
  for (size_t k = 0; k < z_.size(); ++k) {
    const auto proj = weighted_projection(basis, w_[k], z_[k], Exec::Serial);
    total += (w_[k].array() * proj.fitted.array() * z_[k].array()).sum();
  }
  return total;
}

double CriterionContext::goodness_of_fit_baseline() const {
  if (!state_set_) throw UserError("criterion: extraction state not set");
  if (A_.cols() == 0) return 0.0;
  double total = 0.0;
  for (size_t k = 0; k < z_.size(); ++k) {
    const ResponseBlocks& b = blocks_[k];
    Eigen::LDLT<Mat> ldlt(b.M);
    const Vec c = ldlt.solve(b.sz);
    if (ldlt.info() == Eigen::Success && c.allFinite()) total += b.sz.dot(c);
  }
  return total;
}

double CriterionContext::combined(const Vec& u) const {
  double J = 0.0;
  if (s_ > 0.0) {
    const double phi = structural_relevance(u);
    if (phi < kCriterionFloor)
      throw NumericalError("criterion: structural relevance vanished");
    J += s_ * std::log(phi);
  }
  if (s_ < 1.0) {
    const double psi = goodness_of_fit(u);
    if (psi < kCriterionFloor)
      throw NumericalError("criterion: goodness of fit vanished");
    J += (1.0 - s_) * std::log(psi);
  }
  return J;
}

std::pair<double, Vec> CriterionContext::combined_with_grad(const Vec& u) const {
  const int r = reduced_dim();
  double J = 0.0;
  Vec g = Vec::Zero(r);
  if (s_ > 0.0) {
    const double phi = structural_relevance(u);
    if (phi < kCriterionFloor)
      throw NumericalError("criterion: structural relevance vanished");
    J += s_ * std::log(phi);
    g += s_ * structural_relevance_log_grad(u);
  }
  if (s_ < 1.0) {
    if (!state_set_) throw UserError("criterion: extraction state not set");
    double psi = 0.0;
    Vec gpsi = Vec::Zero(r);
    const int q = static_cast<int>(blocks_.size());
    if (exec_ == Exec::Parallel && q > 1) {
      std::vector<double> pv(q);
      std::vector<Vec> pg(q);
      bool failed = false;  // exceptions must not cross the parallel region
#pragma omp parallel for schedule(static)
      for (int k = 0; k < q; ++k) {
        try {
          pv[k] = psi_one(blocks_[k], u, &pg[k]);
        } catch (const std::exception&) {
#pragma omp atomic write
          failed = true;
        }
      }
      if (failed)
        throw NumericalError("goodness of fit: projection system is singular");
      for (int k = 0; k < q; ++k) {
        psi += pv[k];
        gpsi += pg[k];
      }
    } else {
      Vec gk(r);
      for (int k = 0; k < q; ++k) {
        psi += psi_one(blocks_[k], u, &gk);
        gpsi += gk;
      }
    }
    if (psi < kCriterionFloor)
      throw NumericalError("criterion: goodness of fit vanished");
    J += (1.0 - s_) * std::log(psi);
    g += ((1.0 - s_) / psi) * gpsi;
  }
  return {J, g};
}

}  // namespace scglr
