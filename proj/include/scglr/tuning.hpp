#pragma once

#include <cstdint>
#include <vector>

#include "scglr/fit.hpp"
#include "scglr/model.hpp"

namespace scglr {

// Leave-observations-out-per-group cross-validation: every fold holds
// out the same number of rows from every group, so each group stays
// observed in every training part and group effects can be predicted.
struct CvPlan {
  int n_folds = 5;
  int holdout_per_group = 2;
  std::uint64_t seed = 0;
  bool standardised_error = true;  // divide squared errors by Var(y_hat)
};

// Shuffles each group's rows and deals them to the folds.  Folds
// partition all rows: with group sizes equal to n_folds *
// holdout_per_group each fold gets exactly the configured count per
// group; leftover rows are dealt round-robin.
std::vector<std::vector<int>> make_folds(const GroupDesign& groups,
                                         const CvPlan& plan);

// Cross-validation error of one response column given its out-of-fold
// predictions: the fold-wise root mean square (optionally standardised)
// errors are averaged over folds.  Rows of excluded folds carry NaN
// predictions and their folds are skipped.
double fold_error(const Vec& y, const Vec& yhat, const Vec& varhat,
                  const std::vector<std::vector<int>>& folds,
                  bool standardised);

struct CvResult {
  double error = 0.0;       // mean over responses of the per-response error
  Vec per_response;         // q
  std::vector<int> failed_folds;
};

// Fits on each fold's complement and scores conditional predictions on
// the held-out rows.  Folds whose fit fails or does not converge are
// excluded (recorded in failed_folds); with no usable fold the error is
// +infinity.
CvResult cv_error(const ModelData& data, const Hyperparams& hp,
                  const CvPlan& plan);

struct GridSpec {
  std::vector<int> K{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> s{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> l{1.0};
};

struct GridCell {
  int K = 0;
  double s = 0.0, l = 0.0;
  double error = 0.0;
  bool failed = false;
};

struct GridResult {
  std::vector<GridCell> cells;
  int K_star = 0;
  double s_star = 0.0, l_star = 0.0;
  double best_error = 0.0;
};

// Exhaustive search over the grid.  Components nest in K (extraction is
// sequential), so each (s, l, fold) does one max-K extraction and every
// K gets its own final refit from a copy of the state.  Work items run
// in parallel; ties prefer smaller K, then larger s, then smaller l.
GridResult grid_search(const ModelData& data, const GridSpec& grid,
                       const CvPlan& plan, const Hyperparams& base);

// Mean relative squared error over replicate estimates of one
// coefficient vector: mean_b ||beta_hat_b - beta||^2 / ||beta||^2.
double mrse(const std::vector<Vec>& beta_hats, const Vec& truth);

// Worst response per replicate, averaged:
// mean_b max_k ||beta_hat_bk - beta_k||^2 / ||beta_k||^2.
double murse(const std::vector<std::vector<Vec>>& beta_hats,
             const std::vector<Vec>& truths);

struct LatentMetrics {
  Vec cor;  // per latent: |cor| with the most-correlated fitted component
  Vec err;  // per response: relative squared error of the X-part predictor
};

// Agreement between fitted components and the latent variables that
// generated the data.  `latents` holds one column per latent variable;
// `targets` gives, per response, the latent combination entering its
// predictor (n-vector); errors compare X beta_hat against it.
LatentMetrics latent_metrics(const FittedModel& model, const Mat& X,
                             const Mat& latents, const Mat& targets);

}  // namespace scglr
