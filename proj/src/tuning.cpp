#include "scglr/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scglr/errors.hpp"
#include "scglr/rng.hpp"

namespace scglr {

std::vector<std::vector<int>> make_folds(const GroupDesign& groups,
                                         const CvPlan& plan) {
  if (plan.n_folds < 2) throw UserError("cross-validation needs >= 2 folds");
  if (plan.holdout_per_group < 1)
    throw UserError("cross-validation needs >= 1 held-out row per group");
  const auto sizes = groups.sizes();
  const int min_size = *std::min_element(sizes.begin(), sizes.end());
  if (plan.holdout_per_group * plan.n_folds > min_size)
    throw UserError("smallest group has " + std::to_string(min_size) +
                    " rows; cannot hold out " +
                    std::to_string(plan.holdout_per_group) + " rows in " +
                    std::to_string(plan.n_folds) + " folds");

  std::vector<std::vector<int>> members(groups.n_groups);
  for (int i = 0; i < groups.n(); ++i) members[groups.group_of[i]].push_back(i);

  std::vector<std::vector<int>> folds(plan.n_folds);
  for (int g = 0; g < groups.n_groups; ++g) {
    Rng rng = make_rng(derive_seed(plan.seed, static_cast<std::uint64_t>(g)));
    std::shuffle(members[g].begin(), members[g].end(), rng);
    const int h = plan.holdout_per_group;
    const int dealt = h * plan.n_folds;
    for (int j = 0; j < plan.n_folds; ++j)
      for (int t = 0; t < h; ++t) folds[j].push_back(members[g][j * h + t]);
    // leftover rows keep the partition property
    for (size_t t = dealt; t < members[g].size(); ++t)
      folds[(t - dealt) % plan.n_folds].push_back(members[g][t]);
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

double fold_error(const Vec& y, const Vec& yhat, const Vec& varhat,
                  const std::vector<std::vector<int>>& folds,
                  bool standardised) {
  double total = 0.0;
  int used = 0;
  for (const auto& fold : folds) {
    double acc = 0.0;
    bool usable = !fold.empty();
    for (const int i : fold) {
      if (!std::isfinite(yhat[i])) {
        usable = false;
        break;
      }
      double e2 = (y[i] - yhat[i]) * (y[i] - yhat[i]);
      if (standardised) e2 /= std::max(varhat[i], 1e-12);
      acc += e2;
    }
    if (!usable) continue;
    total += std::sqrt(acc / static_cast<double>(fold.size()));
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::infinity();
  return total / used;
}

namespace {

std::vector<int> complement_rows(int n, const std::vector<int>& fold) {
  std::vector<bool> held(n, false);
  for (const int i : fold) held[i] = true;
  std::vector<int> out;
  out.reserve(n - fold.size());
  for (int i = 0; i < n; ++i)
    if (!held[i]) out.push_back(i);
  return out;
}

// Out-of-fold conditional predictions for the held-out rows, written
// into `yhat`/`varhat` (response scale).
void predict_held_out(const FittedModel& model, const ModelData& data,
                      const std::vector<int>& fold, Mat& yhat, Mat& varhat) {
  const int q = data.q();
  Mat X_new(fold.size(), data.X.cols());
  Mat A_new(fold.size(), data.A.cols());
  std::vector<int> groups_new(fold.size());
  for (size_t t = 0; t < fold.size(); ++t) {
    X_new.row(t) = data.X.row(fold[t]);
    if (data.A.cols() > 0) A_new.row(t) = data.A.row(fold[t]);
    groups_new[t] = data.groups.group_of[fold[t]];
  }
  std::vector<Vec> trials(q);
  for (int k = 0; k < q; ++k) {
    if (data.families[k].kind == FamilyKind::Binomial) {
      trials[k].resize(fold.size());
      for (size_t t = 0; t < fold.size(); ++t)
        trials[k][t] = data.families[k].trials[fold[t]];
    }
  }
  const Predictions pred = predict(model, X_new, A_new, groups_new,
                                   PredictMode::Conditional, trials);
  for (int k = 0; k < q; ++k) {
    ResponseFamily fam = model.families[k];
    if (fam.kind == FamilyKind::Binomial) fam.trials = trials[k];
    const Vec var = fam.response_variance(pred.eta.col(k));
    for (size_t t = 0; t < fold.size(); ++t) {
      yhat(fold[t], k) = pred.mu(t, k);
      varhat(fold[t], k) = var[t];
    }
  }
}

}  // namespace

CvResult cv_error(const ModelData& data, const Hyperparams& hp,
                  const CvPlan& plan) {
  const auto folds = make_folds(data.groups, plan);
  const int n = data.n();
  const int q = data.q();
  Mat yhat = Mat::Constant(n, q, std::numeric_limits<double>::quiet_NaN());
  Mat varhat = Mat::Ones(n, q);

  CvResult out;
  for (size_t j = 0; j < folds.size(); ++j) {
    const ModelData train = data.subset_rows(complement_rows(n, folds[j]));
    try {
      const FittedModel model = fit(train, hp);
      if (!model.report.converged()) {
        out.failed_folds.push_back(static_cast<int>(j));
        continue;
      }
      predict_held_out(model, data, folds[j], yhat, varhat);
    } catch (const std::exception&) {
      out.failed_folds.push_back(static_cast<int>(j));
    }
  }

  out.per_response.resize(q);
  for (int k = 0; k < q; ++k)
    out.per_response[k] = fold_error(data.Y.col(k), yhat.col(k), varhat.col(k),
                                     folds, plan.standardised_error);
  out.error = out.per_response.mean();
  return out;
}

namespace {

struct ExtractionSnapshot {
  Mat F;                   // components extracted so far
  Mat Ured;
  std::vector<FitState> states;  // state copy after each component
  std::vector<bool> comp_converged;
  FitState state0;         // state before any component
};

// One max-K extraction on a training subset, with state snapshots after
// every component so each grid K can refit from the right warm state.
ExtractionSnapshot extract_path(const PreparedData& prep,
                                const Hyperparams& hp, int K_max) {
  ExtractionSnapshot snap;
  CriterionContext crit(prep.red.C, prep.Xs, prep.p_weights, hp.omega, hp.l,
                        hp.s, hp.exec);
  FitState state = init_state(prep, hp);
  snap.state0 = state;
  snap.F.resize(prep.n(), 0);
  snap.Ured.resize(prep.r(), 0);
  const int cap = std::min(K_max, prep.r());
  for (int h = 0; h < cap; ++h) {
    SingleComponentFit scf =
        fit_single_component(prep, hp, crit, snap.F, state);
    if (scf.report.psi_gain < hp.psi_gain_tol) break;
    snap.F.conservativeResize(Eigen::NoChange, h + 1);
    snap.F.col(h) = scf.f;
    snap.Ured.conservativeResize(Eigen::NoChange, h + 1);
    snap.Ured.col(h) = scf.u;
    snap.states.push_back(state);
    snap.comp_converged.push_back(scf.report.converged);
  }
  return snap;
}

// Refit the first K extracted components and predict the held-out rows.
bool refit_and_predict(const PreparedData& prep, const Hyperparams& hp,
                       const ExtractionSnapshot& snap, int K,
                       const ModelData& data, const std::vector<int>& fold,
                       Mat& yhat, Mat& varhat) {
  const int K_use = std::min<int>(K, snap.F.cols());
  for (int c = 0; c < K_use; ++c)
    if (!snap.comp_converged[c]) return false;

  FitState state = K_use > 0 ? snap.states[K_use - 1] : snap.state0;
  Mat basis(prep.n(), K_use + prep.A1.cols());
  if (K_use > 0) basis.leftCols(K_use) = snap.F.leftCols(K_use);
  if (prep.A1.cols() > 0) basis.rightCols(prep.A1.cols()) = prep.A1;
  const BasisFit bf = fit_basis(prep, hp, basis, state);
  if (!bf.converged) return false;

  const int q = data.q();
  const Mat load = prep.red.V * snap.Ured.leftCols(K_use);  // p x K_use
  for (size_t t = 0; t < fold.size(); ++t) {
    const int i = fold[t];
    const Vec x_std = ((data.X.row(i).transpose() - prep.x_center).array() /
                       prep.x_scale.array())
                          .matrix();
    for (int k = 0; k < q; ++k) {
      double eta = 0.0;
      for (int c = 0; c < K_use; ++c)
        eta += bf.coef(k, c) * x_std.dot(load.col(c));
      if (hp.intercept) eta += bf.coef(k, K_use);
      for (int j = 0; j < data.A.cols(); ++j)
        eta += bf.coef(k, K_use + (hp.intercept ? 1 : 0) + j) * data.A(i, j);
      eta += state.xi(k, data.groups.group_of[i]);

      ResponseFamily fam = prep.families[k];
      fam.dispersion = state.dispersion[k];
      if (fam.kind == FamilyKind::Binomial) {
        fam.trials = Vec::Constant(1, data.families[k].trials[i]);
      }
      const Vec eta1 = Vec::Constant(1, eta);
      yhat(i, k) = fam.link_inverse(eta1)[0];
      varhat(i, k) = fam.response_variance(eta1)[0];
    }
  }
  return true;
}

}  // namespace

GridResult grid_search(const ModelData& data, const GridSpec& grid,
                       const CvPlan& plan, const Hyperparams& base) {
  if (grid.K.empty() || grid.s.empty() || grid.l.empty())
    throw UserError("grid search needs non-empty K, s and l grids");
  const auto folds = make_folds(data.groups, plan);
  const int n = data.n();
  const int q = data.q();
  const int n_s = static_cast<int>(grid.s.size());
  const int n_l = static_cast<int>(grid.l.size());
  const int n_folds = static_cast<int>(folds.size());
  const int K_max = *std::max_element(grid.K.begin(), grid.K.end());

  std::vector<std::vector<int>> train_rows;
  train_rows.reserve(n_folds);
  for (const auto& fold : folds) train_rows.push_back(complement_rows(n, fold));

  // Work items: one (s, l, fold) triple each; every item extracts once
  // and serves every K.  Predictions are stored per (s, l, K).
  const int n_items = n_s * n_l * n_folds;
  const int n_cells = n_s * n_l * static_cast<int>(grid.K.size());
  std::vector<Mat> cell_yhat(
      n_cells, Mat::Constant(n, q, std::numeric_limits<double>::quiet_NaN()));
  std::vector<Mat> cell_varhat(n_cells, Mat::Ones(n, q));

#pragma omp parallel for schedule(dynamic)
  for (int item = 0; item < n_items; ++item) {
    const int fold_idx = item % n_folds;
    const int l_idx = (item / n_folds) % n_l;
    const int s_idx = item / (n_folds * n_l);

    Hyperparams hp = base;
    hp.s = grid.s[s_idx];
    hp.l = grid.l[l_idx];
    hp.K = K_max;

    try {
      const ModelData train = data.subset_rows(train_rows[fold_idx]);
      const PreparedData prep = prepare(train, hp, true);
      const ExtractionSnapshot snap = extract_path(prep, hp, K_max);
      for (size_t ki = 0; ki < grid.K.size(); ++ki) {
        const int cell = (s_idx * n_l + l_idx) * static_cast<int>(grid.K.size()) +
                         static_cast<int>(ki);
        refit_and_predict(prep, hp, snap, grid.K[ki], data, folds[fold_idx],
                          cell_yhat[cell], cell_varhat[cell]);
      }
    } catch (const std::exception&) {
      // leave the fold's predictions NaN: the fold is excluded
    }
  }

  GridResult out;
  out.cells.reserve(n_cells);
  bool any = false;
  for (int s_idx = 0; s_idx < n_s; ++s_idx)
    for (int l_idx = 0; l_idx < n_l; ++l_idx)
      for (size_t ki = 0; ki < grid.K.size(); ++ki) {
        const int cell = (s_idx * n_l + l_idx) * static_cast<int>(grid.K.size()) +
                         static_cast<int>(ki);
        GridCell gc;
        gc.K = grid.K[ki];
        gc.s = grid.s[s_idx];
        gc.l = grid.l[l_idx];
        double total = 0.0;
        for (int k = 0; k < q; ++k)
          total += fold_error(data.Y.col(k), cell_yhat[cell].col(k),
                              cell_varhat[cell].col(k), folds,
                              plan.standardised_error);
        gc.error = total / q;
        gc.failed = !std::isfinite(gc.error);
        if (gc.failed) gc.error = std::numeric_limits<double>::infinity();

        const bool better =
            !any || gc.error < out.best_error ||
            (gc.error == out.best_error &&
             (gc.K < out.K_star ||
              (gc.K == out.K_star &&
               (gc.s > out.s_star ||
                (gc.s == out.s_star && gc.l < out.l_star)))));
        if (better && !gc.failed) {
          out.K_star = gc.K;
          out.s_star = gc.s;
          out.l_star = gc.l;
          out.best_error = gc.error;
          any = true;
        }
        out.cells.push_back(gc);
      }
  if (!any) throw NumericalError("every grid cell failed cross-validation");
  return out;
}

double mrse(const std::vector<Vec>& beta_hats, const Vec& truth) {
  if (beta_hats.empty()) throw UserError("mrse needs at least one estimate");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw UserError("mrse: true coefficient vector is zero");
  double acc = 0.0;
  for (const auto& bh : beta_hats) acc += (bh - truth).squaredNorm() / denom;
  return acc / static_cast<double>(beta_hats.size());
}

double murse(const std::vector<std::vector<Vec>>& beta_hats,
             const std::vector<Vec>& truths) {
  if (beta_hats.empty()) throw UserError("murse needs at least one replicate");
  double acc = 0.0;
  for (const auto& rep : beta_hats) {
    if (rep.size() != truths.size())
      throw UserError("murse: one estimate per true vector required");
    double worst = 0.0;
    for (size_t k = 0; k < truths.size(); ++k) {
      const double denom = truths[k].squaredNorm();
      if (!(denom > 0.0)) throw UserError("murse: true coefficient vector is zero");
      worst = std::max(worst, (rep[k] - truths[k]).squaredNorm() / denom);
    }
    acc += worst;
  }
  return acc / static_cast<double>(beta_hats.size());
}

namespace {

double abs_correlation(const Vec& a, const Vec& b) {
  const double am = a.mean(), bm = b.mean();
  const Vec ac = a.array() - am;
  const Vec bc = b.array() - bm;
  const double denom = ac.norm() * bc.norm();
  if (denom < 1e-300) return 0.0;
  return std::abs(ac.dot(bc) / denom);
}

}  // namespace

LatentMetrics latent_metrics(const FittedModel& model, const Mat& X,
                             const Mat& latents, const Mat& targets) {
  LatentMetrics out;
  out.cor = Vec::Zero(latents.cols());
  for (int j = 0; j < latents.cols(); ++j) {
    double best = 0.0;
    for (int c = 0; c < model.F.cols(); ++c)
      best = std::max(best, abs_correlation(latents.col(j), model.F.col(c)));
    out.cor[j] = best;
  }
  out.err = Vec::Zero(model.q());
  for (int k = 0; k < model.q(); ++k) {
    const Vec fitted_part =
        (X * model.beta.row(k).transpose()).array() + model.beta0[k];
    const double denom = targets.col(k).squaredNorm();
    out.err[k] = (fitted_part - targets.col(k)).squaredNorm() /
                 std::max(denom, 1e-300);
  }
  return out;
}

}  // namespace scglr
