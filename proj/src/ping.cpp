#include "scglr/ping.hpp"

#include <cmath>

#include "scglr/errors.hpp"
#include "scglr/rng.hpp"

namespace scglr {

Mat orthogonality_projector(const Mat& B, int* dropped) {
  const int r = static_cast<int>(B.rows());
  if (dropped) *dropped = 0;
  if (B.cols() == 0) return Mat::Identity(r, r);

  Eigen::ColPivHouseholderQR<Mat> qr(B);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  if (dropped) *dropped = static_cast<int>(B.cols()) - rank;
  if (rank == 0) return Mat::Identity(r, r);
  if (rank >= r)
    throw NumericalError("orthogonality constraints span the whole space");
  const Mat Q = qr.householderQ() * Mat::Identity(r, rank);
  return Mat::Identity(r, r) - Q * Q.transpose();
}

namespace {

struct VSpace {
  const SphereProgram& prog;
  const Mat& Pi;

  double value(const Vec& v) const { return prog.value(prog.M_half * v); }
  std::pair<double, Vec> value_and_grad(const Vec& v) const {
    auto [J, gu] = prog.value_and_grad(prog.M_half * v);
    return {J, prog.M_half * gu};
  }
  Vec feasible(const Vec& v) const {
    Vec out = Pi * v;
    const double norm = out.norm();
    if (norm < 1e-12)
      throw NumericalError("starting loading lies in the constraint span");
    return out / norm;
  }
};

// Back-halving search: accept the normalised gradient point kappa, and
// while it does not improve on v, pull it halfway back towards v on the
// sphere.  Returns the accepted point; `halvings` counts the pulls.
Vec halving_step(const VSpace& vs, const Vec& v, double Jv, const Vec& kappa,
                 int max_halvings, int* halvings) {
  Vec m = kappa;
  *halvings = 0;
  double Jm = vs.value(m);
  while (Jm < Jv && *halvings < max_halvings) {
    m = (v + m).normalized();
    Jm = vs.value(m);
    ++(*halvings);
  }
  if (Jm < Jv) return v;  // exhausted: keep the current iterate
  return m;
}

// Safeguarded Newton iteration on the great-circle arc through v towards
// kappa; falls back to halving when it fails to improve.
Vec newton_arc_step(const VSpace& vs, const Vec& v, double Jv,
                    const Vec& kappa, const PingOptions& opts, int* halvings) {
  *halvings = 0;
  const double c = v.dot(kappa);
  Vec w = kappa - c * v;
  const double wn = w.norm();
  if (wn < 1e-14) return v;  // kappa == v: at a fixed point of the map
  w /= wn;

  const auto h_prime = [&](double theta) {
    const Vec vt = std::cos(theta) * v + std::sin(theta) * w;
    auto [J, g] = vs.value_and_grad(vt);
    (void)J;
    return g.dot(-std::sin(theta) * v + std::cos(theta) * w);
  };

  double theta = std::atan2(wn, c);  // arc length to kappa itself
  const double lo = 0.0, hi = M_PI;
  for (int it = 0; it < opts.newton_iters; ++it) {
    const double d1 = h_prime(theta);
    const double dd = 1e-4 * std::max(theta, 1e-3);
    const double d2 = (h_prime(theta + dd) - h_prime(theta - dd)) / (2.0 * dd);
    if (std::abs(d2) < 1e-14) break;
    double next = theta - d1 / d2;
    if (!(next > lo) || !(next < hi)) break;
    if (std::abs(next - theta) < 1e-12) {
      theta = next;
      break;
    }
    theta = next;
  }
  const Vec cand = (std::cos(theta) * v + std::sin(theta) * w).normalized();
  if (vs.value(cand) >= Jv) return cand;
  return halving_step(vs, v, Jv, kappa, opts.max_halvings, halvings);
}

PingResult solve_from(const VSpace& vs, Vec v, const PingOptions& opts) {
  PingResult res;
  v = vs.feasible(v);
  auto [J, g] = vs.value_and_grad(v);

  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    const Vec d = vs.Pi * g;
    const double dn = d.norm();
    if (dn < 1e-14) {  // projected gradient vanished: critical point
      res.converged = true;
      res.trace.push_back({J, 0.0, 0});
      break;
    }
    const Vec kappa = d / dn;

    int halvings = 0;
    Vec vnext = (opts.line_search == LineSearch::NewtonArc)
                    ? newton_arc_step(vs, v, J, kappa, opts, &halvings)
                    : halving_step(vs, v, J, kappa, opts.max_halvings,
                                   &halvings);
    vnext = vnext.normalized();  // defend against rounding drift

    const double step = (vnext - v).norm();
    v = vnext;
    auto eval = vs.value_and_grad(v);
    J = eval.first;
    g = eval.second;
    res.trace.push_back({J, step, halvings});
    if (step <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  res.u = vs.prog.M_half * v;
  res.J = J;
  return res;
}

}  // namespace

PingResult ping_solve(const SphereProgram& prog) {
  const Mat B = prog.M_half * prog.Delta;
  const Mat Pi = orthogonality_projector(B);
  const VSpace vs{prog, Pi};

  Vec v0 = prog.M_half_inv * prog.init;
  Rng rng = make_rng(prog.opts.perturb_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; ; ++attempt) {
    try {
      return solve_from(vs, v0, prog.opts);
    } catch (const NumericalError&) {
      if (attempt >= prog.opts.retries) throw;
      // restart from a perturbed feasible point
      Vec noise(v0.size());
      for (int i = 0; i < noise.size(); ++i) noise[i] = gauss(rng);
      v0 = prog.M_half_inv * prog.init + 0.25 * noise;
    }
  }
}

Vec pls1_init(const Mat& C, const Vec& p_weights, const std::vector<Vec>& z,
              const std::vector<Vec>& w, const Mat& F_prev,
              const Mat& M_half_inv) {
  Mat Cd = C;
  if (F_prev.cols() > 0) {
    // Remove the P-orthogonal projection onto the extracted components
    // (their columns are P-orthonormal).
    const Mat FtPC = F_prev.transpose() * p_weights.asDiagonal() * C;
    Cd.noalias() -= F_prev * FtPC;
  }
  Vec u0 = Vec::Zero(C.cols());
  for (size_t k = 0; k < z.size(); ++k)
    u0 += Cd.transpose() * (w[k].array() * z[k].array()).matrix();

  if (u0.norm() < 1e-12) {
    // No covariance left: fall back to the dominant principal axis of C
    // under P (in reduced coordinates).
    const Mat G = weighted_gram(C, p_weights, Exec::Serial);
    Eigen::SelfAdjointEigenSolver<Mat> eig(G);
    u0 = eig.eigenvectors().col(G.cols() - 1);
  }
  const double vnorm = (M_half_inv * u0).norm();
  if (vnorm < 1e-300)
    throw NumericalError("starting loading collapsed to zero");
  return u0 / vnorm;
}

}  // namespace scglr
