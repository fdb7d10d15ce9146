#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "scglr/errors.hpp"
#include "scglr/linmix.hpp"
#include "scglr/relevance.hpp"
#include "scglr/rng.hpp"

using namespace scglr;

namespace {

Mat random_matrix(Rng& rng, int n, int m, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Mat out(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = d(rng);
  return out;
}

Mat standardised(const Mat& X) {
  Mat out = X;
  for (int j = 0; j < X.cols(); ++j) {
    out.col(j).array() -= out.col(j).mean();
    out.col(j) /= std::sqrt(out.col(j).squaredNorm() / X.rows());
  }
  return out;
}

struct Setup {
  Mat X, C;
  Vec pw;
  std::vector<Vec> z, w;
  Mat A;
};

Setup make_setup(int n, int p, int q, int m, unsigned seed) {
  Rng rng = make_rng(seed);
  Setup s;
  s.X = standardised(random_matrix(rng, n, p));
  s.pw = Vec::Constant(n, 1.0 / n);
  s.C = eigen_basis(s.X, s.pw, false).C;
  for (int k = 0; k < q; ++k) {
    s.z.push_back(random_matrix(rng, n, 1).col(0));
    s.w.push_back(Vec(random_matrix(rng, n, 1).cwiseAbs().col(0).array() + 0.1));
  }
  s.A = m > 0 ? Mat(random_matrix(rng, n, m)) : Mat(n, 0);
  return s;
}

}  // namespace

TEST_CASE("structural relevance hand values and homogeneity") {
  // two observations, metric (1/2, 1/2), predictors x1 = (1,-1), x2 = (2,0),
  // basis C = I, u = (1,1): <Cu, x1>_P = 0, <Cu, x2>_P = 1.
  Mat X(2, 2);
  X << 1, 2, -1, 0;
  const Mat C = Mat::Identity(2, 2);
  const Vec pw = Vec::Constant(2, 0.5);
  Vec u(2);
  u << 1, 1;

  CriterionContext c1(C, X, pw, Vec(), 1.0, 1.0, Exec::Serial);
  CHECK(c1.structural_relevance(u) == doctest::Approx(0.5));
  CriterionContext c2(C, X, pw, Vec(), 2.0, 1.0, Exec::Serial);
  CHECK(c2.structural_relevance(u) == doctest::Approx(std::sqrt(0.5)));

  // phi(cu) = c^2 phi(u) for every l
  const Setup s = make_setup(40, 6, 1, 0, 31);
  Rng rng = make_rng(32);
  const Vec v = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
  for (double l : {1.0, 2.0, 4.0}) {
    CriterionContext crit(s.C, s.X, s.pw, Vec(), l, 1.0);
    const double base = crit.structural_relevance(v);
    CHECK(crit.structural_relevance(3.0 * v) ==
          doctest::Approx(9.0 * base).epsilon(1e-10));
  }
}

TEST_CASE("structural relevance matches the observation-space reference") {
  const Setup s = make_setup(50, 8, 1, 0, 33);
  Rng rng = make_rng(34);
  const Vec u = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
  for (double l : {1.0, 2.0, 4.0}) {
    for (Exec e : {Exec::Serial, Exec::Parallel}) {
      CriterionContext crit(s.C, s.X, s.pw, Vec(), l, 1.0, e);
      const double fast = crit.structural_relevance(u);
      const double ref = crit.structural_relevance_reference(u);
      CHECK(fast == doctest::Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("log-gradient of structural relevance matches finite differences") {
  const Setup s = make_setup(45, 7, 1, 0, 35);
  Rng rng = make_rng(36);
  const Vec u = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
  for (double l : {1.0, 2.0, 4.0}) {
    CriterionContext crit(s.C, s.X, s.pw, Vec(), l, 1.0);
    const Vec g = crit.structural_relevance_log_grad(u);
    const Vec fd = fd_gradient(
        [&](const Vec& v) { return std::log(crit.structural_relevance(v)); },
        u);
    CHECK((g - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("goodness of fit equals a projected weighted norm") {
  // single response, no fixed columns: psi = (f'Wz)^2 / (f'Wf)
  Mat X(2, 1);
  X << 1, -1;
  const Mat C = Mat::Identity(2, 2);
  const Vec pw = Vec::Constant(2, 0.5);
  CriterionContext crit(C, X, pw, Vec(), 1.0, 0.5, Exec::Serial);
  Vec z(2), w(2), u(2);
  z << 2, 0;
  w << 1, 1;
  u << 1, 1;
  crit.set_extraction_state(Mat(2, 0), {z}, {w});
  CHECK(crit.goodness_of_fit(u) == doctest::Approx(2.0));
  CHECK(crit.goodness_of_fit_reference(u) == doctest::Approx(2.0));
}

TEST_CASE("goodness of fit matches the reference with and without columns") {
  for (int m : {0, 3}) {
    const Setup s = make_setup(60, 9, 3, m, 37 + m);
    Rng rng = make_rng(40 + m);
    const Vec u = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
    CriterionContext crit(s.C, s.X, s.pw, Vec(), 1.0, 0.5);
    crit.set_extraction_state(s.A, s.z, s.w);
    CHECK(crit.goodness_of_fit(u) ==
          doctest::Approx(crit.goodness_of_fit_reference(u)).epsilon(1e-9));
  }
}

TEST_CASE("goodness of fit is invariant to scaling the component") {
  const Setup s = make_setup(55, 6, 2, 2, 44);
  Rng rng = make_rng(45);
  const Vec u = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
  CriterionContext crit(s.C, s.X, s.pw, Vec(), 1.0, 0.5);
  crit.set_extraction_state(s.A, s.z, s.w);
  const double base = crit.goodness_of_fit(u);
  CHECK(crit.goodness_of_fit(5.0 * u) == doctest::Approx(base).epsilon(1e-9));
  CHECK(crit.goodness_of_fit(-u) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("combined criterion gradient matches finite differences") {
  for (double sval : {0.0, 0.5, 1.0}) {
    const Setup s = make_setup(50, 8, 2, 2, 46);
    Rng rng = make_rng(47);
    Vec u = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
    u /= u.norm();
    CriterionContext crit(s.C, s.X, s.pw, Vec(), 2.0, sval);
    crit.set_extraction_state(s.A, s.z, s.w);
    const auto [J, g] = crit.combined_with_grad(u);
    CHECK(J == doctest::Approx(crit.combined(u)).epsilon(1e-12));
    const Vec fd =
        fd_gradient([&](const Vec& v) { return crit.combined(v); }, u);
    CHECK((g - fd).norm() < 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("degenerate factors raise numerical errors") {
  // X has one predictor; the second basis direction is P-orthogonal to it,
  // so phi vanishes there.  A zero working vector kills psi everywhere.
  Rng rng = make_rng(48);
  const int n = 30;
  Mat X = standardised(random_matrix(rng, n, 1));
  const Vec pw = Vec::Constant(n, 1.0 / n);
  Mat C(n, 2);
  C.col(0) = X.col(0);
  Vec y = random_matrix(rng, n, 1).col(0);
  // remove the P-projection of y on x to build an orthogonal direction
  const double num = (pw.array() * y.array() * X.col(0).array()).sum();
  C.col(1) = y - num * X.col(0);

  CriterionContext crit(C, X, pw, Vec(), 1.0, 0.5);
  Vec zero_z = Vec::Zero(n);
  crit.set_extraction_state(Mat(n, 0), {zero_z}, {Vec::Ones(n)});
  Vec dead(2);
  dead << 0, 1;  // phi(dead) = 0
  CHECK_THROWS_AS(crit.combined(dead), NumericalError);
  Vec live(2);
  live << 1, 0;  // phi fine, but psi = 0 because z = 0
  CHECK_THROWS_AS(crit.combined(live), NumericalError);

  // with s = 1 the goodness-of-fit factor is unused: no failure
  CriterionContext phi_only(C, X, pw, Vec(), 1.0, 1.0);
  CHECK(std::isfinite(phi_only.combined(live)));
}

TEST_CASE("serial and parallel evaluation agree") {
  // more predictors than one reduction chunk to exercise partial sums
  const int n = 64, p = 300;
  Rng rng = make_rng(49);
  Mat X = standardised(random_matrix(rng, n, p));
  const Vec pw = Vec::Constant(n, 1.0 / n);
  const Mat C = eigen_basis(X, pw, false).C;
  std::vector<Vec> z, w;
  for (int k = 0; k < 3; ++k) {
    z.push_back(random_matrix(rng, n, 1).col(0));
    w.push_back(Vec(random_matrix(rng, n, 1).cwiseAbs().col(0).array() + 0.1));
  }
  const Mat A = random_matrix(rng, n, 2);
  const Vec u = random_matrix(rng, static_cast<int>(C.cols()), 1).col(0);

  CriterionContext cs(C, X, pw, Vec(), 2.0, 0.5, Exec::Serial);
  CriterionContext cp(C, X, pw, Vec(), 2.0, 0.5, Exec::Parallel);
  cs.set_extraction_state(A, z, w);
  cp.set_extraction_state(A, z, w);
  const auto [Js, gs] = cs.combined_with_grad(u);
  const auto [Jp, gp] = cp.combined_with_grad(u);
  CHECK(Js == doctest::Approx(Jp).epsilon(1e-12));
  CHECK((gs - gp).norm() < 1e-12 * std::max(1.0, gs.norm()));
}

TEST_CASE("variable weights are normalised to sum one") {
  const Setup s = make_setup(40, 4, 1, 0, 50);
  Rng rng = make_rng(51);
  const Vec u = random_matrix(rng, static_cast<int>(s.C.cols()), 1).col(0);
  CriterionContext a(s.C, s.X, s.pw, Vec::Constant(4, 0.25), 2.0, 1.0);
  CriterionContext b(s.C, s.X, s.pw, Vec::Constant(4, 7.0), 2.0, 1.0);
  CHECK(a.structural_relevance(u) ==
        doctest::Approx(b.structural_relevance(u)).epsilon(1e-12));
  CHECK_THROWS_AS(
      CriterionContext(s.C, s.X, s.pw, Vec::Zero(4), 1.0, 0.5),
      UserError);
  CHECK_THROWS_AS(CriterionContext(s.C, s.X, s.pw, Vec(), 0.5, 0.5),
                  UserError);
  CHECK_THROWS_AS(CriterionContext(s.C, s.X, s.pw, Vec(), 1.0, 1.5),
                  UserError);
}

TEST_CASE("baseline goodness of fit spans only the fixed columns") {
  const Setup s = make_setup(50, 5, 2, 3, 52);
  CriterionContext crit(s.C, s.X, s.pw, Vec(), 1.0, 0.5);
  crit.set_extraction_state(s.A, s.z, s.w);
  double expect = 0.0;
  for (size_t k = 0; k < s.z.size(); ++k) {
    const auto proj = weighted_projection(s.A, s.w[k], s.z[k]);
    expect += (s.w[k].array() * proj.fitted.array() * s.z[k].array()).sum();
  }
  CHECK(crit.goodness_of_fit_baseline() ==
        doctest::Approx(expect).epsilon(1e-9));

  CriterionContext empty(s.C, s.X, s.pw, Vec(), 1.0, 0.5);
  empty.set_extraction_state(Mat(50, 0), s.z, s.w);
  CHECK(empty.goodness_of_fit_baseline() == 0.0);
}
