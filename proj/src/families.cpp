#include "scglr/families.hpp"

#include <algorithm>
#include <cmath>

#include "scglr/errors.hpp"

namespace scglr {

namespace {

inline double clamp_eta(double eta) {
  return std::clamp(eta, -kEtaClamp, kEtaClamp);
}

inline double logistic(double eta) { return 1.0 / (1.0 + std::exp(-clamp_eta(eta))); }

}  // namespace

std::string family_name(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::Gaussian: return "gaussian";
    case FamilyKind::Bernoulli: return "bernoulli";
    case FamilyKind::Binomial: return "binomial";
    case FamilyKind::Poisson: return "poisson";
  }
  return "unknown";
}

FamilyKind family_from_name(const std::string& name) {
  if (name == "gaussian") return FamilyKind::Gaussian;
  if (name == "bernoulli") return FamilyKind::Bernoulli;
  if (name == "binomial") return FamilyKind::Binomial;
  if (name == "poisson") return FamilyKind::Poisson;
  throw UserError("unknown family '" + name +
                  "' (expected gaussian, bernoulli, binomial or poisson)");
}

ResponseFamily ResponseFamily::gaussian(double dispersion, bool estimate) {
  if (!(dispersion > 0.0)) throw UserError("gaussian dispersion must be positive");
  ResponseFamily f;
  f.kind = FamilyKind::Gaussian;
  f.dispersion = dispersion;
  f.estimate_dispersion = estimate;
  return f;
}

ResponseFamily ResponseFamily::bernoulli() {
  ResponseFamily f;
  f.kind = FamilyKind::Bernoulli;
  f.estimate_dispersion = false;
  return f;
}

ResponseFamily ResponseFamily::binomial(Vec trials) {
  ResponseFamily f;
  f.kind = FamilyKind::Binomial;
  f.trials = std::move(trials);
  f.estimate_dispersion = false;
  for (int i = 0; i < f.trials.size(); ++i) {
    if (!(f.trials[i] > 0.0))
      throw UserError("binomial trials must be positive (row " +
                      std::to_string(i) + ")");
  }
  return f;
}

ResponseFamily ResponseFamily::poisson() {
  ResponseFamily f;
  f.kind = FamilyKind::Poisson;
  f.estimate_dispersion = false;
  return f;
}

void ResponseFamily::validate(const Vec& y, const std::string& name) const {
  const int n = static_cast<int>(y.size());
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(y[i]))
      throw UserError("response '" + name + "' has a non-finite value at row " +
                      std::to_string(i));
  }
  switch (kind) {
    case FamilyKind::Gaussian:
      break;
    case FamilyKind::Bernoulli:
      for (int i = 0; i < n; ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
          throw UserError("bernoulli response '" + name +
                          "' must be 0/1 (row " + std::to_string(i) + ")");
      break;
    case FamilyKind::Binomial:
      if (trials.size() != n)
        throw UserError("binomial response '" + name +
                        "' needs one trial count per observation (got " +
                        std::to_string(trials.size()) + " for " +
                        std::to_string(n) + " rows)");
      for (int i = 0; i < n; ++i)
        if (y[i] < 0.0 || y[i] > trials[i])
          throw UserError("binomial response '" + name +
                          "' outside [0, trials] at row " + std::to_string(i));
      break;
    case FamilyKind::Poisson:
      for (int i = 0; i < n; ++i)
        if (y[i] < 0.0)
          throw UserError("poisson response '" + name +
                          "' must be non-negative (row " + std::to_string(i) +
                          ")");
      break;
  }
}

Vec ResponseFamily::link_inverse(const Vec& eta) const {
  const int n = static_cast<int>(eta.size());
  Vec mu(n);
  switch (kind) {
    case FamilyKind::Gaussian:
      mu = eta;
      break;
    case FamilyKind::Bernoulli:
      for (int i = 0; i < n; ++i) mu[i] = logistic(eta[i]);
      break;
    case FamilyKind::Binomial:
      for (int i = 0; i < n; ++i) mu[i] = trials[i] * logistic(eta[i]);
      break;
    case FamilyKind::Poisson:
      for (int i = 0; i < n; ++i) mu[i] = std::exp(clamp_eta(eta[i]));
      break;
  }
  return mu;
}

Vec ResponseFamily::initial_eta(const Vec& y) const {
  const int n = static_cast<int>(y.size());
  Vec eta(n);
  switch (kind) {
    case FamilyKind::Gaussian:
      eta = y;
      break;
    case FamilyKind::Bernoulli:
      for (int i = 0; i < n; ++i) {
        const double p = (y[i] + 0.5) / 2.0;
        eta[i] = std::log(p / (1.0 - p));
      }
      break;
    case FamilyKind::Binomial:
      for (int i = 0; i < n; ++i) {
        const double p = (y[i] + 0.5) / (trials[i] + 1.0);
        eta[i] = std::log(p / (1.0 - p));
      }
      break;
    case FamilyKind::Poisson:
      for (int i = 0; i < n; ++i) eta[i] = std::log(y[i] + 0.5);
      break;
  }
  return eta;
}

Vec ResponseFamily::working_variable(const Vec& y, const Vec& eta) const {
  const int n = static_cast<int>(eta.size());
  Vec z(n);
  switch (kind) {
    case FamilyKind::Gaussian:
      z = y;  // eta + (y - eta) * 1
      break;
    case FamilyKind::Bernoulli:
      for (int i = 0; i < n; ++i) {
        const double p = logistic(eta[i]);
        z[i] = clamp_eta(eta[i]) + (y[i] - p) / std::max(p * (1.0 - p), kWeightFloor);
      }
      break;
    case FamilyKind::Binomial:
      for (int i = 0; i < n; ++i) {
        const double p = logistic(eta[i]);
        const double v = trials[i] * p * (1.0 - p);
        z[i] = clamp_eta(eta[i]) + (y[i] - trials[i] * p) / std::max(v, kWeightFloor);
      }
      break;
    case FamilyKind::Poisson:
      for (int i = 0; i < n; ++i) {
        const double mu = std::exp(clamp_eta(eta[i]));
        z[i] = clamp_eta(eta[i]) + (y[i] - mu) / std::max(mu, kWeightFloor);
      }
      break;
  }
  return z;
}

Vec ResponseFamily::working_weights(const Vec& eta) const {
  const int n = static_cast<int>(eta.size());
  Vec w(n);
  switch (kind) {
    case FamilyKind::Gaussian:
      w.setConstant(1.0 / dispersion);
      break;
    case FamilyKind::Bernoulli:
      for (int i = 0; i < n; ++i) {
        const double p = logistic(eta[i]);
        w[i] = std::max(p * (1.0 - p), kWeightFloor);
      }
      break;
    case FamilyKind::Binomial:
      for (int i = 0; i < n; ++i) {
        const double p = logistic(eta[i]);
        w[i] = std::max(trials[i] * p * (1.0 - p), kWeightFloor);
      }
      break;
    case FamilyKind::Poisson:
      for (int i = 0; i < n; ++i)
        w[i] = std::max(std::exp(clamp_eta(eta[i])), kWeightFloor);
      break;
  }
  return w;
}

Vec ResponseFamily::response_variance(const Vec& eta) const {
  if (kind == FamilyKind::Gaussian)
    return Vec::Constant(eta.size(), dispersion);
  // For the canonical links above, Var(y) equals the working weight.
  return working_weights(eta);
}

double ResponseFamily::dispersion_estimate(const Vec& z, const Vec& eta,
                                           const Vec& w,
                                           double effective_df) const {
  if (kind != FamilyKind::Gaussian) return 1.0;
  const int n = static_cast<int>(z.size());
  const double denom = n - effective_df;
  if (!(denom > 0.0))
    throw NumericalError("dispersion update needs n > effective df (n = " +
                         std::to_string(n) + ", edf = " +
                         std::to_string(effective_df) + ")");
  const double rss = (w.array() * (z - eta).array().square()).sum();
  return std::max(rss / denom, 1e-12);
}

}  // namespace scglr
