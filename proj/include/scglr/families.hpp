#pragma once

#include <string>

#include <Eigen/Dense>

namespace scglr {

using Vec = Eigen::VectorXd;

enum class FamilyKind { Gaussian, Bernoulli, Binomial, Poisson };

std::string family_name(FamilyKind kind);
FamilyKind family_from_name(const std::string& name);

// Linear predictors are clamped to this range before exponentiation so
// the working weights and variables stay finite.
inline constexpr double kEtaClamp = 30.0;
// Floor applied to working weights (and to the slope denominators that
// define the working variable) so extreme fitted means cannot zero a row.
inline constexpr double kWeightFloor = 1e-10;

// One response distribution with its canonical link:
//   Gaussian/identity, Bernoulli/logit, Binomial/logit (count scale,
//   per-observation trial counts), Poisson/log.
struct ResponseFamily {
  FamilyKind kind = FamilyKind::Gaussian;
  Vec trials;              // Binomial only: per-observation trial counts
  double dispersion = 1.0; // free for Gaussian, fixed 1.0 otherwise
  // Gaussian only: when false the dispersion above is treated as known
  // and never re-estimated (used by likelihood-grid comparisons).
  bool estimate_dispersion = true;

  static ResponseFamily gaussian(double dispersion = 1.0, bool estimate = true);
  static ResponseFamily bernoulli();
  static ResponseFamily binomial(Vec trials);
  static ResponseFamily poisson();

  // Checks y against the family's support; `name` labels error messages.
  void validate(const Vec& y, const std::string& name) const;

  // Mean from the linear predictor; Binomial returns the count-scale
  // mean trials * logit^-1(eta).
  Vec link_inverse(const Vec& eta) const;

  // Starting linear predictor from the raw response (adjusted so the
  // link is finite at the boundary of the support).
  Vec initial_eta(const Vec& y) const;

  // Linearised response z = eta + (y - mu) g'(mu).
  Vec working_variable(const Vec& y, const Vec& eta) const;

  // Diagonal of W: w = 1 / (g'(mu)^2 a(phi) v(mu)), floored at
  // kWeightFloor.  Gaussian: 1/dispersion; Poisson: mu;
  // Bernoulli: mu(1-mu); Binomial: trials p (1-p).
  Vec working_weights(const Vec& eta) const;

  // Var(y) at the given predictor (used to standardise prediction
  // errors): Gaussian dispersion, Poisson mu, Bernoulli mu(1-mu),
  // Binomial trials p(1-p).
  Vec response_variance(const Vec& eta) const;

  // Residual-variance step for the Gaussian dispersion:
  //   phi = sum_i w_i (z_i - eta_i)^2 / (n - effective_df).
  // Non-Gaussian families return 1.0.
  double dispersion_estimate(const Vec& z, const Vec& eta, const Vec& w,
                             double effective_df) const;
};

}  // namespace scglr
