#include "scglr/fit.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "scglr/errors.hpp"

namespace scglr {

namespace {

double rel_change(const Vec& now, const Vec& before) {
  if (now.size() == 0) return 0.0;
  const double denom = std::max(1.0, before.lpNorm<Eigen::Infinity>());
  return (now - before).lpNorm<Eigen::Infinity>() / denom;
}

double rel_change(double now, double before, double floor_scale) {
  return std::abs(now - before) / std::max(before, floor_scale);
}

// Deterministic orientation: the largest-magnitude original-scale
// loading entry of V u is positive.
Vec canonical_sign(const PcaReduction& red, Vec u) {
  const Vec load = red.V * u;
  int imax = 0;
  load.cwiseAbs().maxCoeff(&imax);
  if (load[imax] < 0.0) u = -u;
  return u;
}

}  // namespace

PreparedData prepare(const ModelData& data, const Hyperparams& hp, bool mixed) {
  hp.validate();
  data.validate();
  if (mixed && data.groups.group_of.empty())
    throw UserError("mixed fit needs a grouping column");

  PreparedData prep;
  prep.Y = data.Y;
  prep.families = data.families;
  prep.groups = data.groups;
  prep.exec = hp.exec;
  prep.mixed = mixed;

  const int n = data.n();
  const int p = data.p();
  prep.p_weights = Vec::Constant(n, 1.0 / n);

  prep.x_center = Vec::Zero(p);
  prep.x_scale = Vec::Ones(p);
  prep.Xs = data.X;
  if (hp.standardise) {
    for (int j = 0; j < p; ++j) {
      const double mean = data.X.col(j).mean();
      const double var = (data.X.col(j).array() - mean).square().mean();
      if (var < 1e-12) {
        const std::string name = j < static_cast<int>(data.x_names.size())
                                     ? data.x_names[j]
                                     : "x" + std::to_string(j + 1);
        throw UserError("predictor '" + name + "' has zero variance");
      }
      prep.x_center[j] = mean;
      prep.x_scale[j] = std::sqrt(var);
      prep.Xs.col(j) = (data.X.col(j).array() - mean) / prep.x_scale[j];
    }
  }

  if (hp.intercept) {
    prep.A1.resize(n, 1 + data.A.cols());
    prep.A1.col(0).setOnes();
    if (data.A.cols() > 0) prep.A1.rightCols(data.A.cols()) = data.A;
  } else {
    prep.A1 = data.A;
  }

  bool threshold_rule = true;
  switch (hp.reduction) {
    case ReductionMode::Always:
      threshold_rule = true;
      break;
    case ReductionMode::Never:
      threshold_rule = false;
      break;
    case ReductionMode::Auto: {
      // Reduce through the retention rule only when X cannot have full
      // column rank or its spectrum is numerically deficient; otherwise
      // the eigenbasis is a pure rotation and every direction is kept.
      if (p <= n - 1) {
        const PcaReduction full = eigen_basis(prep.Xs, prep.p_weights, false,
                                              hp.exec);
        if (full.rank == p) {
          prep.red = full;
          threshold_rule = false;
        }
      }
      break;
    }
  }
  if (prep.red.rank == 0)
    prep.red = eigen_basis(prep.Xs, prep.p_weights, threshold_rule, hp.exec);

  // The loading is sought on the Euclidean unit sphere of the reduced
  // coordinates.  On that sphere the structural-relevance terms are squared
  // covariances, so directions carrying more variance score higher and
  // components are drawn to whole bundles rather than to the single best
  // correlated variable.  Accepted components are rescaled to unit P-norm
  // afterwards, which keeps F'PF = I without affecting the maximiser.
  const int r = prep.red.rank;
  prep.M_half = Mat::Identity(r, r);
  prep.M_half_inv = Mat::Identity(r, r);
  return prep;
}

FitState init_state(const PreparedData& prep, const Hyperparams& hp) {
  FitState st;
  const int q = prep.q();
  st.eta.resize(q);
  st.z.resize(q);
  st.w.resize(q);
  st.xi = Mat::Zero(q, prep.mixed ? prep.groups.n_groups : 0);
  st.sigma2 = Vec::Constant(q, hp.sigma2_init);
  st.dispersion.resize(q);
  for (int k = 0; k < q; ++k) {
    const ResponseFamily& fam = prep.families[k];
    st.dispersion[k] = fam.dispersion;
    st.eta[k] = fam.initial_eta(prep.Y.col(k));
    st.z[k] = fam.working_variable(prep.Y.col(k), st.eta[k]);
    ResponseFamily f = fam;
    f.dispersion = st.dispersion[k];
    st.w[k] = f.working_weights(st.eta[k]);
  }
  return st;
}

double estimation_pass(const PreparedData& prep, const Hyperparams& hp,
                       const Mat& basis, FitState& state, Mat& coef) {
  const int q = prep.q();
  const int m = static_cast<int>(basis.cols());
  if (coef.rows() != q || coef.cols() != m)
    throw UserError("estimation_pass: coefficient buffer has wrong shape");

  double worst = 0.0;
  for (int k = 0; k < q; ++k) {
    const Vec coef_old = coef.row(k);
    const double s2_old = state.sigma2[k];

    Vec eta;
    if (prep.mixed) {
      const auto sol = solve_henderson(basis, prep.groups, state.w[k],
                                       state.sigma2[k], state.z[k], prep.exec);
      double s2 = state.sigma2[k];
      if (hp.estimate_variance) {
        try {
          s2 = update_variance(sol.xi, s2, prep.groups, state.w[k]);
        } catch (const VarianceCollapse&) {
          s2 = kVarianceFloor;
          state.notes.push_back("response " + std::to_string(k + 1) +
                                ": variance collapsed, restarted at floor");
        }
      }
      state.sigma2[k] = s2;
      state.xi.row(k) = sol.xi;
      eta = basis * sol.coef + prep.groups.expand(sol.xi);
      coef.row(k) = sol.coef;
    } else {
      const auto proj = weighted_projection(basis, state.w[k], state.z[k],
                                            prep.exec);
      eta = proj.fitted;
      coef.row(k) = proj.coef;
    }

    ResponseFamily fam = prep.families[k];
    fam.dispersion = state.dispersion[k];
    if (fam.kind == FamilyKind::Gaussian && fam.estimate_dispersion) {
      double edf = m;
      if (prep.mixed) {
        const double tr = group_shrinkage_trace(prep.groups, state.w[k],
                                                state.sigma2[k]);
        edf += prep.groups.n_groups - tr / state.sigma2[k];
      }
      state.dispersion[k] = fam.dispersion_estimate(
          state.z[k], eta, Vec::Ones(prep.n()), edf);
      fam.dispersion = state.dispersion[k];
    }

    state.eta[k] = eta;
    state.z[k] = fam.working_variable(prep.Y.col(k), eta);
    state.w[k] = fam.working_weights(eta);

    worst = std::max(worst, rel_change(coef.row(k), coef_old));
    if (prep.mixed && hp.estimate_variance)
      worst = std::max(worst, rel_change(state.sigma2[k], s2_old, 1e-3));
  }
  return worst;
}

BasisFit fit_basis(const PreparedData& prep, const Hyperparams& hp,
                   const Mat& basis, FitState& state) {
  BasisFit out;
  out.coef = Mat::Zero(prep.q(), basis.cols());
  for (int it = 1; it <= hp.outer_max_iter; ++it) {
    out.iterations = it;
    const double change = estimation_pass(prep, hp, basis, state, out.coef);
    if (change <= hp.outer_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

SingleComponentFit fit_single_component(const PreparedData& prep,
                                        const Hyperparams& hp,
                                        CriterionContext& crit,
                                        const Mat& F_prev, FitState& state) {
  const int n = prep.n();
  const int h = static_cast<int>(F_prev.cols());
  const int ma = static_cast<int>(prep.A1.cols());

  Mat A_h(n, h + ma);
  if (h > 0) A_h.leftCols(h) = F_prev;
  if (ma > 0) A_h.rightCols(ma) = prep.A1;
  const Mat Delta = weighted_cross(prep.red.C, prep.p_weights, F_prev,
                                   prep.exec);  // C'P F_prev, r x h

  // Seed the first solve from the covariance of the deflated regressors with
  // what the new component still has to explain.  For later components the
  // working variate is offset-adjusted by the current fit (previous
  // components, covariates and random-effect predictions), i.e. the seed is
  // the score direction at the current state; otherwise the already explained
  // share of a strong response would drown the remaining signal.
  std::vector<Vec> seed_z = state.z;
  if (h > 0)
    for (size_t k = 0; k < seed_z.size(); ++k) seed_z[k] -= state.eta[k];
  Vec u = canonical_sign(
      prep.red, pls1_init(prep.red.C, prep.p_weights, seed_z, state.w, F_prev,
                          prep.M_half_inv));

  Mat coef = Mat::Zero(prep.q(), 1 + h + ma);
  SingleComponentFit out;
  double change = std::numeric_limits<double>::infinity();

  for (int t = 1; t <= hp.outer_max_iter; ++t) {
    crit.set_extraction_state(A_h, state.z, state.w);

    SphereProgram prog;
    prog.value = [&crit](const Vec& v) { return crit.combined(v); };
    prog.value_and_grad = [&crit](const Vec& v) {
      return crit.combined_with_grad(v);
    };
    prog.M_half = prep.M_half;
    prog.M_half_inv = prep.M_half_inv;
    prog.Delta = Delta;
    prog.init = u;
    prog.opts = hp.ping;

    const PingResult ping = ping_solve(prog);
    const Vec u_new = canonical_sign(prep.red, ping.u);
    const Vec f = prep.red.C * u_new;

    Mat basis(n, 1 + h + ma);
    basis.col(0) = f;
    if (A_h.cols() > 0) basis.rightCols(A_h.cols()) = A_h;

    const double pass_change = estimation_pass(prep, hp, basis, state, coef);
    change = std::max(pass_change, rel_change(u_new, u));
    u = u_new;

    out.report.iterations = t;
    out.report.criterion = ping.J;
    out.report.last_change = change;
    if (change <= hp.outer_tol) {
      out.report.converged = true;
      break;
    }
  }

  // Store the component with unit P-norm; the direction is what matters and
  // the regression coefficients are refit against the stored scale.
  const Vec f_raw = prep.red.C * u;
  const double f_norm =
      std::sqrt(weighted_dot(f_raw, prep.p_weights, f_raw, prep.exec));
  const double scale = f_norm > kCriterionFloor ? 1.0 / f_norm : 1.0;
  out.u = scale * u;
  out.f = scale * f_raw;

  // Goodness-of-fit gain of the accepted component on the final state.
  crit.set_extraction_state(A_h, state.z, state.w);
  const double base = crit.goodness_of_fit_baseline();
  const double with = crit.goodness_of_fit(u);
  out.report.psi_gain = (with - base) / std::max(base, kCriterionFloor);
  return out;
}

namespace {

FittedModel assemble(const ModelData& data, const Hyperparams& hp,
                     const PreparedData& prep, const Mat& Ured, const Mat& F,
                     const Mat& coef, const FitState& state,
                     ConvergenceReport report) {
  const int p = prep.p();
  const int q = prep.q();
  const int K = static_cast<int>(F.cols());

  FittedModel m;
  m.response_names = data.response_names;
  m.x_names = data.x_names;
  m.a_names = data.a_names;
  m.group_names = data.group_names;
  if (m.response_names.empty())
    for (int k = 0; k < q; ++k)
      m.response_names.push_back("y" + std::to_string(k + 1));
  if (m.x_names.empty())
    for (int j = 0; j < p; ++j) m.x_names.push_back("x" + std::to_string(j + 1));

  m.families = prep.families;
  for (int k = 0; k < q; ++k) m.families[k].dispersion = state.dispersion[k];
  m.K = K;
  m.s = hp.s;
  m.l = hp.l;
  m.intercept = hp.intercept;
  m.x_center = prep.x_center;
  m.x_scale = prep.x_scale;
  m.V = prep.red.V;
  m.eigvals = prep.red.eigvals;
  m.rank = prep.red.rank;

  m.u = Ured;
  m.loadings = prep.red.V * Ured;
  m.F = F;
  m.gamma = coef.leftCols(K);
  m.delta = coef.rightCols(coef.cols() - K);
  m.xi = state.xi;
  m.sigma2 = prep.mixed ? state.sigma2 : Vec::Zero(q);
  m.dispersion = state.dispersion;

  m.beta.resize(q, p);
  m.beta0.resize(q);
  for (int k = 0; k < q; ++k) {
    const Vec beta_std = m.loadings * m.gamma.row(k).transpose();
    double shift = 0.0;
    for (int j = 0; j < p; ++j) {
      m.beta(k, j) = beta_std[j] / prep.x_scale[j];
      shift += beta_std[j] * prep.x_center[j] / prep.x_scale[j];
    }
    m.beta0[k] = (hp.intercept ? m.delta(k, 0) : 0.0) - shift;
  }

  // Metric cosines of every predictor with every component.
  m.correlations.resize(p, K);
  m.inertia_pct.resize(K);
  if (K > 0) {
    const Mat SP = weighted_cross(prep.Xs, prep.p_weights, F, prep.exec);
    Vec xnorm(p);
    for (int j = 0; j < p; ++j)
      xnorm[j] = std::sqrt(
          (prep.p_weights.array() * prep.Xs.col(j).array().square()).sum());
    for (int c = 0; c < K; ++c) {
      const double fnorm = std::sqrt(
          (prep.p_weights.array() * F.col(c).array().square()).sum());
      double acc = 0.0;
      for (int j = 0; j < p; ++j) {
        const double cosv = SP(j, c) / std::max(xnorm[j] * fnorm, 1e-300);
        m.correlations(j, c) = cosv;
        acc += cosv * cosv;
      }
      m.inertia_pct[c] = 100.0 * acc / p;
    }
  }

  report.realised_K = K;
  for (const auto& note : state.notes) report.notes.push_back(note);
  m.report = std::move(report);
  return m;
}

FittedModel fit_impl(const ModelData& data, const Hyperparams& hp, bool mixed) {
  const PreparedData prep = prepare(data, hp, mixed);
  const int r = prep.r();

  Hyperparams hpk = hp;
  ConvergenceReport report;
  report.requested_K = hp.K;
  int Kmax = hp.K;
  if (Kmax > r) {
    Kmax = r;
    report.notes.push_back("K capped at the reduced rank " +
                           std::to_string(r));
  }

  CriterionContext crit(prep.red.C, prep.Xs, prep.p_weights, hp.omega, hp.l,
                        hp.s, hp.exec);
  FitState state = init_state(prep, hpk);

  Mat F(prep.n(), 0), Ured(r, 0);
  for (int h = 0; h < Kmax; ++h) {
    SingleComponentFit scf =
        fit_single_component(prep, hpk, crit, F, state);
    if (scf.report.psi_gain < hpk.psi_gain_tol) {
      report.notes.push_back(
          "stopped after " + std::to_string(h) +
          " component(s): goodness-of-fit gain fell below threshold");
      break;
    }
    F.conservativeResize(Eigen::NoChange, h + 1);
    F.col(h) = scf.f;
    Ured.conservativeResize(Eigen::NoChange, h + 1);
    Ured.col(h) = scf.u;
    report.components.push_back(scf.report);
  }

  Mat basis(prep.n(), F.cols() + prep.A1.cols());
  if (F.cols() > 0) basis.leftCols(F.cols()) = F;
  if (prep.A1.cols() > 0) basis.rightCols(prep.A1.cols()) = prep.A1;
  if (basis.cols() == 0)
    throw UserError("model has no fixed-effect columns at all "
                    "(K = 0 and no covariates or intercept)");
  const BasisFit bf = fit_basis(prep, hpk, basis, state);
  report.refit_iterations = bf.iterations;
  report.refit_converged = bf.converged;

  return assemble(data, hp, prep, Ured, F, bf.coef, state, std::move(report));
}

}  // namespace

FittedModel fit(const ModelData& data, const Hyperparams& hp) {
  return fit_impl(data, hp, true);
}

FittedModel fit_fixed(const ModelData& data, const Hyperparams& hp) {
  return fit_impl(data, hp, false);
}

FittedModel fit_unregularised(const ModelData& data, const Hyperparams& hp) {
  const PreparedData prep = prepare(data, hp, true);
  const int r = prep.r();

  FitState state = init_state(prep, hp);
  Mat basis(prep.n(), r + prep.A1.cols());
  basis.leftCols(r) = prep.red.C;
  if (prep.A1.cols() > 0) basis.rightCols(prep.A1.cols()) = prep.A1;

  const BasisFit bf = fit_basis(prep, hp, basis, state);
  ConvergenceReport report;
  report.requested_K = r;
  report.refit_iterations = bf.iterations;
  report.refit_converged = bf.converged;

  // Present the full-span fit in the standard layout: loadings are the
  // eigenbasis itself and gamma its coefficients.
  const Mat Ured = Mat::Identity(r, r);
  return assemble(data, hp, prep, Ured, prep.red.C, bf.coef, state,
                  std::move(report));
}

}  // namespace scglr
