#include "scglr/sim.hpp"

#include <cmath>
#include <random>
#include <vector>

#include "scglr/errors.hpp"
#include "scglr/rng.hpp"

namespace scglr {

std::string sim_kind_name(SimKind kind) {
  switch (kind) {
    case SimKind::GaussBundles: return "gauss-bundles";
    case SimKind::BernPois: return "bern-pois";
    case SimKind::BinomPois: return "binom-pois";
    case SimKind::LatentBundle: return "latent-bundle";
    case SimKind::HighDim: return "highdim";
  }
  throw UserError("unknown simulation design");
}

SimKind sim_kind_from_name(const std::string& name) {
  if (name == "gauss-bundles") return SimKind::GaussBundles;
  if (name == "bern-pois") return SimKind::BernPois;
  if (name == "binom-pois") return SimKind::BinomPois;
  if (name == "latent-bundle") return SimKind::LatentBundle;
  if (name == "highdim") return SimKind::HighDim;
  throw UserError("unknown simulation design '" + name +
                  "' (expected gauss-bundles, bern-pois, binom-pois, "
                  "latent-bundle or highdim)");
}

void SimDesign::validate() const {
  if (n_groups < 1 || group_size < 1)
    throw UserError("simulation needs at least one group and one row per group");
  if (kind == SimKind::LatentBundle) {
    if (!(stn > 0.0)) throw UserError("signal-to-noise ratio must be positive");
  } else {
    if (!(tau >= 0.0 && tau < 1.0))
      throw UserError("bundle correlation tau must lie in [0, 1)");
  }
  if (kind == SimKind::HighDim && p != 150 && p != 200)
    throw UserError("the high-dimensional design is defined for p = 150 or 200");
}

namespace {

Vec draw_normal(Rng& rng, int n, double sd) {
  std::normal_distribution<double> dist(0.0, sd);
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = dist(rng);
  return out;
}

// One equicorrelated bundle: x_j = sqrt(tau) g + sqrt(1-tau) eps_j with
// a shared factor g per bundle, so cor(x_j, x_k) = tau exactly.
Mat draw_bundle(Rng& rng, int n, int p_j, double tau, Vec& factor) {
  factor = draw_normal(rng, n, 1.0);
  Mat out(n, p_j);
  const double a = std::sqrt(tau), b = std::sqrt(1.0 - tau);
  for (int j = 0; j < p_j; ++j)
    out.col(j) = a * factor + b * draw_normal(rng, n, 1.0);
  return out;
}

Mat draw_bundles(Rng& rng, int n, const std::vector<int>& sizes, double tau,
                 Mat& factors) {
  int p = 0;
  for (const int s : sizes) p += s;
  Mat X(n, p);
  factors.resize(n, sizes.size());
  int at = 0;
  for (size_t b = 0; b < sizes.size(); ++b) {
    Vec g;
    X.middleCols(at, sizes[b]) = draw_bundle(rng, n, sizes[b], tau, g);
    factors.col(b) = g;
    at += sizes[b];
  }
  return X;
}

GroupDesign block_groups(int N, int R) {
  GroupDesign g;
  g.n_groups = N;
  g.group_of.resize(N * R);
  for (int i = 0; i < N * R; ++i) g.group_of[i] = i / R;
  return g;
}

Vec expand_xi(const Vec& xi, const GroupDesign& g) {
  Vec out(g.n());
  for (int i = 0; i < g.n(); ++i) out[i] = xi[g.group_of[i]];
  return out;
}

double inv_logit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

Vec draw_gaussian_response(Rng& rng, const Vec& eta, double omega) {
  return eta + draw_normal(rng, eta.size(), omega);
}

Vec draw_bernoulli_response(Rng& rng, const Vec& eta) {
  Vec y(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    std::bernoulli_distribution d(inv_logit(eta[i]));
    y[i] = d(rng) ? 1.0 : 0.0;
  }
  return y;
}

Vec draw_binomial_response(Rng& rng, const Vec& eta, int trials) {
  Vec y(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    std::binomial_distribution<int> d(trials, inv_logit(eta[i]));
    y[i] = static_cast<double>(d(rng));
  }
  return y;
}

Vec draw_poisson_response(Rng& rng, const Vec& eta) {
  Vec y(eta.size());
  for (int i = 0; i < eta.size(); ++i) {
    std::poisson_distribution<long> d(std::exp(eta[i]));
    y[i] = static_cast<double>(d(rng));
  }
  return y;
}

void default_names(ModelData& data, int N) {
  const int q = data.q(), p = data.p();
  data.response_names.resize(q);
  for (int k = 0; k < q; ++k) data.response_names[k] = "y" + std::to_string(k + 1);
  data.x_names.resize(p);
  for (int j = 0; j < p; ++j) data.x_names[j] = "x" + std::to_string(j + 1);
  data.group_names.resize(N);
  for (int g = 0; g < N; ++g) data.group_names[g] = "g" + std::to_string(g + 1);
}

// Bundle-pattern coefficient vector: `values` fills one block of the
// partition `sizes`, all other entries zero.
Vec block_beta(const std::vector<int>& sizes, int block, const Vec& values) {
  int p = 0, at = 0;
  for (const int s : sizes) p += s;
  Vec beta = Vec::Zero(p);
  for (int b = 0; b < block; ++b) at += sizes[b];
  beta.segment(at, values.size()) = values;
  return beta;
}

Vec beta1_pattern() {
  Vec v(10);
  v << 0.3, 0.3, 0.3, 0.4, 0.4, 0.4, 0.4, 0.5, 0.5, 0.5;
  return v;
}

Vec beta2_pattern() {
  Vec v(5);
  v << 0.3, 0.3, 0.4, 0.5, 0.5;
  return v;
}

// The three-bundle designs share predictors and coefficient patterns;
// only the response distributions and group variances differ.
SimResult three_bundle_design(const SimDesign& d) {
  const int N = d.n_groups, R = d.group_size, n = N * R;
  const std::vector<int> sizes{15, 10, 5};
  Rng rng = make_rng(d.seed);

  SimResult out;
  out.data.groups = block_groups(N, R);
  out.data.X = draw_bundles(rng, n, sizes, d.tau, out.truth.latents);
  out.data.A.resize(n, 0);

  const bool gauss = d.kind == SimKind::GaussBundles;
  Vec beta1 = block_beta(sizes, 1, beta1_pattern());
  const Vec beta2 = block_beta(sizes, 2, beta2_pattern());
  if (!gauss) beta1 *= 0.1;  // theta1 = 0.1 beta1, theta2 = beta2

  out.truth.beta = {beta1, beta2};
  out.truth.sigma2.resize(2);
  out.truth.sigma2 << (gauss ? 1.0 : 0.1), 1.0;

  out.truth.xi.resize(2, N);
  out.truth.xi.row(0) = draw_normal(rng, N, std::sqrt(out.truth.sigma2[0])).transpose();
  out.truth.xi.row(1) = draw_normal(rng, N, std::sqrt(out.truth.sigma2[1])).transpose();

  const Vec part1 = out.data.X * beta1;
  const Vec part2 = out.data.X * beta2;
  const Vec eta1 = part1 + expand_xi(out.truth.xi.row(0), out.data.groups);
  const Vec eta2 = part2 + expand_xi(out.truth.xi.row(1), out.data.groups);
  out.truth.targets.resize(n, 2);
  out.truth.targets.col(0) = part1;
  out.truth.targets.col(1) = part2;

  out.data.Y.resize(n, 2);
  switch (d.kind) {
    case SimKind::GaussBundles:
      out.data.Y.col(0) = draw_gaussian_response(rng, eta1, 1.0);
      out.data.Y.col(1) = draw_gaussian_response(rng, eta2, 1.0);
      out.data.families = {ResponseFamily::gaussian(), ResponseFamily::gaussian()};
      break;
    case SimKind::BernPois:
      out.data.Y.col(0) = draw_bernoulli_response(rng, eta1);
      out.data.Y.col(1) = draw_poisson_response(rng, eta2);
      out.data.families = {ResponseFamily::bernoulli(), ResponseFamily::poisson()};
      break;
    case SimKind::BinomPois:
      out.data.Y.col(0) = draw_binomial_response(rng, eta1, 50);
      out.data.Y.col(1) = draw_poisson_response(rng, eta2);
      out.data.families = {ResponseFamily::binomial(Vec::Constant(n, 50.0)),
                           ResponseFamily::poisson()};
      break;
    default:
      throw UserError("not a three-bundle design");
  }
  default_names(out.data, N);
  return out;
}

SimResult latent_bundle_design(const SimDesign& d) {
  const int N = d.n_groups, R = d.group_size, n = N * R;
  const double var_lv = d.stn / (1.0 + d.stn);
  const double var_noise = 1.0 - var_lv;
  Rng rng = make_rng(d.seed);

  SimResult out;
  out.data.groups = block_groups(N, R);
  out.data.X.resize(n, 31);

  const Vec phi1 = draw_normal(rng, n, std::sqrt(var_lv));
  for (int j = 0; j < 10; ++j)
    out.data.X.col(j) = phi1 + draw_normal(rng, n, std::sqrt(var_noise));
  const Vec phi2 = draw_normal(rng, n, 1.0);
  out.data.X.col(10) = phi2;
  for (int j = 11; j < 31; ++j) out.data.X.col(j) = draw_normal(rng, n, 1.0);
  out.data.A.resize(n, 0);

  const double a1 = 2.0, a2 = 1.0, a3 = 0.5;
  out.truth.sigma2.resize(3);
  out.truth.sigma2 << 2.0, 1.0, 0.5;
  out.truth.xi.resize(3, N);
  for (int k = 0; k < 3; ++k)
    out.truth.xi.row(k) =
        draw_normal(rng, N, std::sqrt(out.truth.sigma2[k])).transpose();

  out.truth.latents.resize(n, 2);
  out.truth.latents.col(0) = phi1;
  out.truth.latents.col(1) = phi2;
  out.truth.targets.resize(n, 3);
  out.truth.targets.col(0) = a1 * phi1;
  out.truth.targets.col(1) = a2 * phi2;
  out.truth.targets.col(2) = a3 * (phi1 + phi2);

  out.data.Y.resize(n, 3);
  out.data.Y.col(0) = draw_gaussian_response(
      rng, out.truth.targets.col(0) + expand_xi(out.truth.xi.row(0), out.data.groups),
      1.0);
  out.data.Y.col(1) = draw_poisson_response(
      rng, out.truth.targets.col(1) + expand_xi(out.truth.xi.row(1), out.data.groups));
  out.data.Y.col(2) = draw_binomial_response(
      rng, out.truth.targets.col(2) + expand_xi(out.truth.xi.row(2), out.data.groups),
      25);
  out.data.families = {ResponseFamily::gaussian(), ResponseFamily::poisson(),
                       ResponseFamily::binomial(Vec::Constant(n, 25.0))};
  default_names(out.data, N);
  return out;
}

SimResult highdim_design(const SimDesign& d) {
  const int N = d.n_groups, R = d.group_size, n = N * R;
  const std::vector<int> sizes = d.p == 150 ? std::vector<int>{60, 45, 30, 15}
                                            : std::vector<int>{80, 60, 40, 20};
  Rng rng = make_rng(d.seed);

  SimResult out;
  out.data.groups = block_groups(N, R);
  out.data.X = draw_bundles(rng, n, sizes, d.tau, out.truth.latents);
  out.data.A.resize(n, 0);

  const Vec beta1 = block_beta(sizes, 1, Vec::Constant(sizes[1], 0.1));
  const Vec beta2 = block_beta(sizes, 2, Vec::Constant(sizes[2], 0.1));
  const Vec beta3 = block_beta(sizes, 3, Vec::Constant(sizes[3], 0.05));
  const Vec beta4 = block_beta(sizes, 1, Vec::Constant(sizes[1], 0.025)) +
                    block_beta(sizes, 2, Vec::Constant(sizes[2], 0.025));
  out.truth.beta = {beta1, beta2, beta3, beta4};
  out.truth.sigma2.resize(4);
  out.truth.sigma2 << 0.1, 0.1, 0.1, 0.05;

  out.truth.xi.resize(4, N);
  for (int k = 0; k < 4; ++k)
    out.truth.xi.row(k) =
        draw_normal(rng, N, std::sqrt(out.truth.sigma2[k])).transpose();

  out.truth.targets.resize(n, 4);
  for (int k = 0; k < 4; ++k)
    out.truth.targets.col(k) = out.data.X * out.truth.beta[k];

  std::vector<Vec> eta(4);
  for (int k = 0; k < 4; ++k)
    eta[k] = out.truth.targets.col(k) +
             expand_xi(out.truth.xi.row(k), out.data.groups);

  out.data.Y.resize(n, 4);
  out.data.Y.col(0) = draw_gaussian_response(rng, eta[0], 1.0);
  out.data.Y.col(1) = draw_bernoulli_response(rng, eta[1]);
  out.data.Y.col(2) = draw_binomial_response(rng, eta[2], 30);
  out.data.Y.col(3) = draw_poisson_response(rng, eta[3]);
  out.data.families = {ResponseFamily::gaussian(), ResponseFamily::bernoulli(),
                       ResponseFamily::binomial(Vec::Constant(n, 30.0)),
                       ResponseFamily::poisson()};
  default_names(out.data, N);
  return out;
}

}  // namespace

SimResult simulate(const SimDesign& design) {
  design.validate();
  SimResult out;
  switch (design.kind) {
    case SimKind::GaussBundles:
    case SimKind::BernPois:
    case SimKind::BinomPois:
      out = three_bundle_design(design);
      break;
    case SimKind::LatentBundle:
      out = latent_bundle_design(design);
      break;
    case SimKind::HighDim:
      out = highdim_design(design);
      break;
  }
  out.data.validate();
  return out;
}

}  // namespace scglr
