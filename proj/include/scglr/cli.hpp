#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scglr/config.hpp"
#include "scglr/model.hpp"
#include "scglr/sim.hpp"
#include "scglr/tuning.hpp"

namespace scglr {

// Everything a run needs, collected from the configuration file and the
// command line (flags override file values).  All fields serialise to
// the flat key = value format, and parse -> serialise -> parse is the
// identity.
struct RunConfig {
  std::string command = "fit";  // fit | cv | simulate | export-plot

  // data ingestion
  std::string responses;   // CSV: group column + response columns
  std::string predictors;  // CSV: regularised predictors X
  std::string covariates;  // CSV: extra covariates A (optional)
  std::string groups_col = "group";
  // one token per response column, in column order:
  //   gaussian | bernoulli | poisson | binomial:<trials column>
  std::vector<std::string> families;

  std::string out = ".";       // output directory
  std::string model_path;      // export-plot: fitted model JSON

  // fit hyperparameters
  int K = 1;
  double s = 0.5;
  double l = 1.0;
  bool intercept = true;
  bool standardise = true;
  bool mixed = true;
  std::uint64_t seed = 0;

  // cross-validation
  std::vector<int> K_grid{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> s_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> l_grid{1.0};
  int folds = 5;
  int holdout = 2;
  bool standardised_error = true;

  // simulation
  std::string design = "gauss-bundles";
  double tau = 0.5;
  double stn = 3.0;
  int sim_groups = 10;
  int sim_group_size = 10;
  int sim_p = 150;

  // plot export
  int plane_a = 1, plane_b = 2;
  double cos_threshold = 0.7;

  int jobs = 0;  // 0 = all cores
  int verbosity = 0;

  static RunConfig from_kv(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
};

// Reads the CSV inputs into a ModelData: group labels are mapped to
// contiguous indices in first-appearance order, binomial responses pull
// their trial counts from the declared column, and every response is
// checked against its family's support.
ModelData ingest(const RunConfig& cfg);

// One row of the component-plane export: per-variable cosines with the
// two plane components, per-response cosines of the fitted predictor
// part carried by the components, and the plane's inertia percentages.
struct PlaneRow {
  std::string kind;  // variable | response | inertia
  std::string name;
  double x = 0.0, y = 0.0;
  bool kept = false;
};

std::vector<PlaneRow> export_plot_data(const FittedModel& model, int axis_a,
                                       int axis_b, double cos_threshold);

// Subcommand bodies; each writes its artifacts under cfg.out and throws
// on failure (partial outputs are removed by run_cli).
void run_fit(const RunConfig& cfg);
void run_cv(const RunConfig& cfg);
void run_simulate(const RunConfig& cfg);
void run_export_plot(const RunConfig& cfg);

// Full command-line entry point.  Returns the process exit code:
// 0 success, 1 user error, 2 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace scglr
