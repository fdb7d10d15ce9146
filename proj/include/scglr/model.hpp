#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scglr/families.hpp"
#include "scglr/kernels.hpp"
#include "scglr/linmix.hpp"
#include "scglr/ping.hpp"

namespace scglr {

// One multivariate grouped data set: q responses (independent given the
// components), p predictors entering through components, optional extra
// covariates A (always kept as-is apart from the appended intercept),
// and a random intercept per group.
struct ModelData {
  Mat Y;                                   // n x q
  std::vector<ResponseFamily> families;    // q
  Mat X;                                   // n x p
  Mat A;                                   // n x r_A (may have 0 columns)
  GroupDesign groups;
  std::vector<std::string> response_names, x_names, a_names, group_names;

  int n() const { return static_cast<int>(Y.rows()); }
  int q() const { return static_cast<int>(Y.cols()); }
  int p() const { return static_cast<int>(X.cols()); }
  void validate() const;
  ModelData subset_rows(const std::vector<int>& rows) const;
};

enum class ReductionMode {
  Auto,    // reduce only when X is column-rank deficient (or p >= n)
  Always,  // apply the eigenvalue retention rule unconditionally
  Never,   // keep every numerically non-zero eigenpair
};

struct Hyperparams {
  int K = 1;            // number of components (0 = covariates-only model)
  double s = 0.5;       // trade-off: 0 pure fit, 1 pure structural relevance
  double l = 1.0;       // bundle locality (1 = closest to first PC)
  Vec omega;            // predictor weights; empty = uniform 1/p

  double outer_tol = 1e-5;     // relative-change threshold per component
  int outer_max_iter = 100;
  double psi_gain_tol = 1e-8;  // early stop on goodness-of-fit gain
  PingOptions ping;

  bool intercept = true;       // append a constant column to A
  bool standardise = true;     // centre/scale X inside the fit
  bool estimate_variance = true;
  double sigma2_init = 1.0;
  ReductionMode reduction = ReductionMode::Auto;
  Exec exec = Exec::Parallel;

  void validate() const;
};

struct ComponentReport {
  int iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  double criterion = 0.0;  // J at the accepted loading
  double psi_gain = 0.0;   // relative goodness-of-fit gain of the component
};

struct ConvergenceReport {
  std::vector<ComponentReport> components;
  int refit_iterations = 0;
  bool refit_converged = false;
  int requested_K = 0;
  int realised_K = 0;
  std::vector<std::string> notes;
  bool converged() const;
};

struct FittedModel {
  static constexpr const char* kSchema = "scglr-mix/1";

  std::vector<std::string> response_names, x_names, a_names, group_names;
  std::vector<ResponseFamily> families;

  // hyperparameters the fit actually used
  int K = 0;
  double s = 0.5, l = 1.0;
  bool intercept = true;

  // standardisation constants (original X -> fitted scale)
  Vec x_center, x_scale;

  // reduced predictor space
  Mat V;        // p x r eigenvector loadings
  Vec eigvals;  // r
  int rank = 0;

  // estimates
  Mat u;             // r x K loadings in reduced coordinates
  Mat loadings;      // p x K, V u, per-component unit identification
  Mat F;             // n x K component scores on the training rows
  Mat gamma;         // q x K component coefficients
  Mat delta;         // q x (intercept + r_A) covariate coefficients
  Mat xi;            // q x N predicted group effects
  Vec sigma2;        // q group variances
  Vec dispersion;    // q dispersions (non-Gaussian: 1)
  Mat beta;          // q x p coefficients on the original X scale
  Vec beta0;         // q intercepts on the original scale
  Vec inertia_pct;   // K: percent of predictor inertia captured
  Mat correlations;  // p x K metric cosines cos_P(x_j, f_k)

  ConvergenceReport report;

  int n_components() const { return static_cast<int>(gamma.cols()); }
  int q() const { return static_cast<int>(gamma.rows()); }
};

enum class PredictMode { Marginal, Conditional };

// Linear predictors and response-scale means for new rows.  Conditional
// predictions add the fitted group effects; every new group index must
// then refer to a training group.  Binomial responses need the new
// rows' trial counts (`trials_new`, one vector per response, empty for
// the others).
struct Predictions {
  Mat eta;  // n_new x q
  Mat mu;   // n_new x q, response scale
};
Predictions predict(const FittedModel& model, const Mat& X_new,
                    const Mat& A_new, const std::vector<int>& groups_new,
                    PredictMode mode,
                    const std::vector<Vec>& trials_new = {});

std::string to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);

}  // namespace scglr
