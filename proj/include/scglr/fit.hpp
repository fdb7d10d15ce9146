#pragma once

#include <memory>
#include <vector>

#include "scglr/model.hpp"
#include "scglr/relevance.hpp"

namespace scglr {

// Data readied for fitting: standardised predictors, reduced working
// basis C with the metric square roots for the sphere program, and the
// covariate block with its appended intercept.
struct PreparedData {
  Mat Y;
  std::vector<ResponseFamily> families;
  GroupDesign groups;
  Mat Xs;        // standardised predictors
  Vec x_center, x_scale;
  Mat A1;        // [intercept | A]
  Vec p_weights; // observation metric diagonal, sums to 1
  PcaReduction red;
  Mat M_half, M_half_inv;  // (C'PC)^(-1/2) and (C'PC)^(1/2), diagonal
  Exec exec = Exec::Parallel;
  bool mixed = true;  // random intercept per group present

  int n() const { return static_cast<int>(Y.rows()); }
  int q() const { return static_cast<int>(Y.cols()); }
  int p() const { return static_cast<int>(Xs.cols()); }
  int r() const { return red.rank; }
};

PreparedData prepare(const ModelData& data, const Hyperparams& hp, bool mixed);

// Per-response working state of the alternated fit.
struct FitState {
  std::vector<Vec> eta, z, w;
  Mat xi;          // q x N (q x 0 for fixed-effect fits)
  Vec sigma2;      // q
  Vec dispersion;  // q
  std::vector<std::string> notes;
};

FitState init_state(const PreparedData& prep, const Hyperparams& hp);

// One estimation pass for every response given fixed basis columns:
// Henderson solve (or weighted projection for fixed-effect fits),
// variance-component and dispersion steps, then refresh of the working
// vectors.  `coef` (q x m) carries the current coefficients in and out;
// returns the largest relative parameter change of the pass.
double estimation_pass(const PreparedData& prep, const Hyperparams& hp,
                       const Mat& basis, FitState& state, Mat& coef);

struct BasisFit {
  Mat coef;  // q x m
  int iterations = 0;
  bool converged = false;
};

// Iterates estimation passes on a fixed basis until the parameters are
// stable; used for the K = 0 model, the joint final refit, and the
// unregularised (full-span) comparison path.
BasisFit fit_basis(const PreparedData& prep, const Hyperparams& hp,
                   const Mat& basis, FitState& state);

struct SingleComponentFit {
  Vec u;  // loading in reduced coordinates, u' C'PC u = 1
  Vec f;  // component scores C u
  ComponentReport report;
};

// Extracts the next component given the ones already extracted
// (columns of F_prev): alternates the sphere program for the loading
// with the per-response estimation passes until both stabilise.
SingleComponentFit fit_single_component(const PreparedData& prep,
                                        const Hyperparams& hp,
                                        CriterionContext& crit,
                                        const Mat& F_prev, FitState& state);

// Full pipeline: prepare, extract K components sequentially, joint final
// refit of every response on [F | A], assemble the fitted model.
FittedModel fit(const ModelData& data, const Hyperparams& hp);

// Same pipeline without random effects (weighted projections replace
// the Henderson solves everywhere).
FittedModel fit_fixed(const ModelData& data, const Hyperparams& hp);

// The s -> 0, K = rank limit of the pipeline: since K = rank components
// span the whole reduced space whatever the criterion, the final refit
// equals a direct basis fit on [C | A]; computed that way.  Coefficients
// are returned on the original predictor scale like any fitted model.
FittedModel fit_unregularised(const ModelData& data, const Hyperparams& hp);

}  // namespace scglr
