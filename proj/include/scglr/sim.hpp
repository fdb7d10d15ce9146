#pragma once

#include <cstdint>
#include <string>

#include "scglr/model.hpp"

namespace scglr {

// The five study generators.  All draw grouped data with a random
// intercept per group and rows ordered group by group.
//   GaussBundles: three equicorrelated predictor bundles (15/10/5),
//     two Gaussian responses each driven by one bundle.
//   BernPois:     same predictors; Bernoulli + Poisson responses.
//   BinomPois:    same, with the Bernoulli response replaced by a
//     50-trial binomial.
//   LatentBundle: ten predictors built around a latent variable, one
//     isolated predictive variable, twenty noise variables; Gaussian,
//     Poisson and 25-trial binomial responses.
//   HighDim:      p in {150, 200} > n, four bundles, four responses
//     (Gaussian, Bernoulli, 30-trial binomial, Poisson).
enum class SimKind { GaussBundles, BernPois, BinomPois, LatentBundle, HighDim };

std::string sim_kind_name(SimKind kind);
SimKind sim_kind_from_name(const std::string& name);

struct SimDesign {
  SimKind kind = SimKind::GaussBundles;
  double tau = 0.5;      // within-bundle correlation (bundle designs)
  double stn = 3.0;      // signal-to-noise ratio (LatentBundle)
  int n_groups = 10;     // N
  int group_size = 10;   // R
  int p = 150;           // HighDim only: 150 or 200
  std::uint64_t seed = 0;

  void validate() const;
};

// Everything needed to score estimates against the generator.
struct SimTruth {
  std::vector<Vec> beta;  // per response: true fixed effects on X
                          // (empty for LatentBundle, whose predictors
                          // do not carry a unique coefficient vector)
  Vec sigma2;             // per response: group-effect variance
  Mat xi;                 // q x N simulated group effects
  Mat latents;            // factor draws: bundle factors, or the
                          // latent variables of LatentBundle
  Mat targets;            // n x q true X-part linear predictors
};

struct SimResult {
  ModelData data;
  SimTruth truth;
};

// Draws one sample.  A fixed seed reproduces the sample bit for bit:
// the draw order is fixed (predictors column by column, then group
// effects, then responses row by row).
SimResult simulate(const SimDesign& design);

}  // namespace scglr
