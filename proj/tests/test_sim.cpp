#include <doctest.h>

#include <cmath>
#include <set>

#include "scglr/errors.hpp"
#include "scglr/sim.hpp"

using namespace scglr;

namespace {

double correlation(const Vec& a, const Vec& b) {
  const Vec ac = a.array() - a.mean();
  const Vec bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

bool integral_in(const Vec& y, double lo, double hi) {
  for (int i = 0; i < y.size(); ++i) {
    if (y[i] < lo || y[i] > hi) return false;
    if (y[i] != std::floor(y[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("design names round trip and reject unknowns") {
  for (const SimKind kind :
       {SimKind::GaussBundles, SimKind::BernPois, SimKind::BinomPois,
        SimKind::LatentBundle, SimKind::HighDim}) {
    CHECK(sim_kind_from_name(sim_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(sim_kind_from_name("made-up"), UserError);
}

TEST_CASE("designs validate their parameters") {
  SimDesign d;
  d.tau = 1.0;
  CHECK_THROWS_AS(simulate(d), UserError);
  d.tau = 0.5;
  d.n_groups = 0;
  CHECK_THROWS_AS(simulate(d), UserError);
  d.n_groups = 10;
  d.kind = SimKind::LatentBundle;
  d.stn = 0.0;
  CHECK_THROWS_AS(simulate(d), UserError);
  d.stn = 3.0;
  d.kind = SimKind::HighDim;
  d.p = 100;
  CHECK_THROWS_AS(simulate(d), UserError);
}

TEST_CASE("a fixed seed reproduces the draw bit for bit") {
  for (const SimKind kind :
       {SimKind::GaussBundles, SimKind::LatentBundle, SimKind::HighDim}) {
    SimDesign d;
    d.kind = kind;
    d.seed = 77;
    const SimResult a = simulate(d);
    const SimResult b = simulate(d);
    CHECK((a.data.X - b.data.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.data.Y - b.data.Y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.truth.xi - b.truth.xi).cwiseAbs().maxCoeff() == 0.0);

    d.seed = 78;
    const SimResult c = simulate(d);
    CHECK((a.data.X - c.data.X).cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("the three-bundle gaussian design") {
  SimDesign d;
  d.kind = SimKind::GaussBundles;
  d.seed = 5;
  const SimResult sim = simulate(d);
  const ModelData& data = sim.data;

  CHECK(data.n() == 100);
  CHECK(data.p() == 30);
  CHECK(data.q() == 2);
  CHECK(data.families[0].kind == FamilyKind::Gaussian);
  CHECK(data.families[1].kind == FamilyKind::Gaussian);
  CHECK(data.groups.n_groups == 10);
  CHECK(data.x_names.size() == 30);
  CHECK(data.response_names == std::vector<std::string>{"y1", "y2"});

  // frozen coefficient patterns: nuisance bundle, then the two
  // predictive bundles
  REQUIRE(sim.truth.beta.size() == 2);
  const Vec& b1 = sim.truth.beta[0];
  const Vec& b2 = sim.truth.beta[1];
  CHECK(b1.head(15).isZero());
  CHECK(b1.tail(5).isZero());
  Vec expect1(10);
  expect1 << 0.3, 0.3, 0.3, 0.4, 0.4, 0.4, 0.4, 0.5, 0.5, 0.5;
  CHECK(b1.segment(15, 10).isApprox(expect1));
  CHECK(b2.head(25).isZero());
  Vec expect2(5);
  expect2 << 0.3, 0.3, 0.4, 0.5, 0.5;
  CHECK(b2.tail(5).isApprox(expect2));
  CHECK(sim.truth.sigma2[0] == 1.0);
  CHECK(sim.truth.sigma2[1] == 1.0);

  // targets are exactly the X-part predictors
  CHECK(sim.truth.targets.col(0).isApprox(Vec(data.X * b1), 1e-12));
  CHECK(sim.truth.targets.col(1).isApprox(Vec(data.X * b2), 1e-12));
  CHECK(sim.truth.latents.cols() == 3);
  CHECK(sim.truth.xi.rows() == 2);
  CHECK(sim.truth.xi.cols() == 10);
}

TEST_CASE("the discrete three-bundle designs") {
  SimDesign d;
  d.kind = SimKind::BernPois;
  d.seed = 6;
  const SimResult bp = simulate(d);
  CHECK(bp.data.families[0].kind == FamilyKind::Bernoulli);
  CHECK(bp.data.families[1].kind == FamilyKind::Poisson);
  CHECK(integral_in(bp.data.Y.col(0), 0, 1));
  CHECK(integral_in(bp.data.Y.col(1), 0, 1e12));
  CHECK(bp.truth.sigma2[0] == 0.1);
  CHECK(bp.truth.sigma2[1] == 1.0);

  // the binary response's coefficients are the gaussian ones shrunk 10x
  SimDesign dg = d;
  dg.kind = SimKind::GaussBundles;
  const SimResult g = simulate(dg);
  CHECK(bp.truth.beta[0].isApprox(Vec(0.1 * g.truth.beta[0]), 1e-12));
  CHECK(bp.truth.beta[1].isApprox(g.truth.beta[1], 1e-12));

  d.kind = SimKind::BinomPois;
  const SimResult bn = simulate(d);
  CHECK(bn.data.families[0].kind == FamilyKind::Binomial);
  REQUIRE(bn.data.families[0].trials.size() == 100);
  CHECK(bn.data.families[0].trials.minCoeff() == 50.0);
  CHECK(bn.data.families[0].trials.maxCoeff() == 50.0);
  CHECK(integral_in(bn.data.Y.col(0), 0, 50));
  CHECK(bn.truth.beta[0].isApprox(Vec(0.1 * g.truth.beta[0]), 1e-12));
}

TEST_CASE("the latent-variable design") {
  SimDesign d;
  d.kind = SimKind::LatentBundle;
  d.stn = 3.0;
  d.seed = 7;
  const SimResult sim = simulate(d);
  const ModelData& data = sim.data;

  CHECK(data.p() == 31);
  CHECK(data.q() == 3);
  CHECK(sim.truth.beta.empty());
  CHECK(data.families[0].kind == FamilyKind::Gaussian);
  CHECK(data.families[1].kind == FamilyKind::Poisson);
  CHECK(data.families[2].kind == FamilyKind::Binomial);
  CHECK(data.families[2].trials.minCoeff() == 25.0);
  CHECK(integral_in(data.Y.col(2), 0, 25));

  // the isolated predictive variable IS the second latent variable
  CHECK((data.X.col(10) - sim.truth.latents.col(1)).cwiseAbs().maxCoeff() ==
        0.0);

  // targets: 2 phi1, 1 phi2, 0.5 (phi1 + phi2)
  const Vec phi1 = sim.truth.latents.col(0);
  const Vec phi2 = sim.truth.latents.col(1);
  CHECK(sim.truth.targets.col(0).isApprox(Vec(2.0 * phi1), 1e-12));
  CHECK(sim.truth.targets.col(1).isApprox(phi2, 1e-12));
  CHECK(sim.truth.targets.col(2).isApprox(Vec(0.5 * (phi1 + phi2)), 1e-12));
  Vec s2(3);
  s2 << 2.0, 1.0, 0.5;
  CHECK(sim.truth.sigma2.isApprox(s2));

  // signal-to-noise split: var(phi1) = stn/(1+stn) of a unit total
  const double var_lv = (phi1.array() - phi1.mean()).square().mean();
  CHECK(var_lv == doctest::Approx(0.75).epsilon(0.25));
}

TEST_CASE("the high-dimensional design") {
  SimDesign d;
  d.kind = SimKind::HighDim;
  d.p = 150;
  d.seed = 8;
  const SimResult sim = simulate(d);
  CHECK(sim.data.p() == 150);
  CHECK(sim.data.q() == 4);
  CHECK(sim.data.n() == 100);

  // block partition 60/45/30/15: responses 1..3 each own one bundle,
  // response 4 spreads a smaller effect over bundles 2 and 3
  const Vec& b1 = sim.truth.beta[0];
  const Vec& b4 = sim.truth.beta[3];
  CHECK(b1.head(60).isZero());
  CHECK(b1.segment(60, 45).isApprox(Vec(Vec::Constant(45, 0.1))));
  CHECK(b1.tail(45).isZero());
  CHECK(sim.truth.beta[1].segment(105, 30).isApprox(
      Vec(Vec::Constant(30, 0.1))));
  CHECK(sim.truth.beta[2].tail(15).isApprox(Vec(Vec::Constant(15, 0.05))));
  CHECK(b4.head(60).isZero());
  CHECK(b4.segment(60, 75).isApprox(Vec(Vec::Constant(75, 0.025))));
  CHECK(b4.tail(15).isZero());

  Vec s2(4);
  s2 << 0.1, 0.1, 0.1, 0.05;
  CHECK(sim.truth.sigma2.isApprox(s2));
  CHECK(sim.data.families[2].trials.minCoeff() == 30.0);
  CHECK(integral_in(sim.data.Y.col(1), 0, 1));

  d.p = 200;
  const SimResult wide = simulate(d);
  CHECK(wide.data.p() == 200);
  CHECK(wide.truth.beta[0].segment(80, 60).isApprox(
      Vec(Vec::Constant(60, 0.1))));
}

TEST_CASE("bundles reach their nominal correlation") {
  SimDesign d;
  d.kind = SimKind::GaussBundles;
  d.n_groups = 1000;  // n = 10000 rows for tight empirical moments
  d.tau = 0.5;
  d.seed = 9;
  const SimResult sim = simulate(d);
  const Mat& X = sim.data.X;

  // within-bundle pairs correlate at tau, across bundles at zero
  CHECK(correlation(X.col(0), X.col(1)) == doctest::Approx(0.5).epsilon(0.06));
  CHECK(correlation(X.col(16), X.col(20)) ==
        doctest::Approx(0.5).epsilon(0.06));
  CHECK(std::abs(correlation(X.col(0), X.col(16))) < 0.05);
  CHECK(std::abs(correlation(X.col(16), X.col(26))) < 0.05);

  // each column correlates with its bundle factor at sqrt(tau)
  CHECK(correlation(X.col(3), sim.truth.latents.col(0)) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(0.04));

  // unit marginal variance and simulated group effects match sigma2
  const double sd = std::sqrt((X.col(5).array() - X.col(5).mean())
                                  .square()
                                  .mean());
  CHECK(sd == doctest::Approx(1.0).epsilon(0.05));
  const Vec xi1 = sim.truth.xi.row(0).transpose();
  const double xi_var = (xi1.array() - xi1.mean()).square().mean();
  CHECK(xi_var == doctest::Approx(1.0).epsilon(0.15));

  SimDesign d0 = d;
  d0.tau = 0.0;
  const SimResult indep = simulate(d0);
  CHECK(std::abs(correlation(indep.data.X.col(0), indep.data.X.col(1))) <
        0.05);
}
