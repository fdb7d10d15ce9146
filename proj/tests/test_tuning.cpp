#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "scglr/errors.hpp"
#include "scglr/rng.hpp"
#include "scglr/tuning.hpp"

using namespace scglr;

namespace {

Mat random_matrix(Rng& rng, int n, int m, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Mat out(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = d(rng);
  return out;
}

GroupDesign block_design(int n_groups, int group_size) {
  GroupDesign g;
  g.n_groups = n_groups;
  g.group_of.resize(n_groups * group_size);
  for (int i = 0; i < n_groups * group_size; ++i)
    g.group_of[i] = i / group_size;
  return g;
}

ModelData cv_data(unsigned seed, int n_groups = 10, int group_size = 10,
                  int p = 5, int q = 2) {
  Rng rng = make_rng(seed);
  ModelData d;
  d.groups = block_design(n_groups, group_size);
  const int n = d.groups.n();
  d.X = random_matrix(rng, n, p);
  const Vec u = random_matrix(rng, n_groups, 1).col(0) * 0.6;
  d.Y.resize(n, q);
  std::normal_distribution<double> eps(0.0, 0.5);
  for (int k = 0; k < q; ++k) {
    const Vec b = random_matrix(rng, p, 1).col(0) * 0.4;
    for (int i = 0; i < n; ++i)
      d.Y(i, k) = 0.2 + d.X.row(i).dot(b) + u[d.groups.group_of[i]] + eps(rng);
    d.families.push_back(ResponseFamily::gaussian());
  }
  return d;
}

}  // namespace

TEST_CASE("folds partition the rows with balanced group holdouts") {
  const GroupDesign g = block_design(6, 10);
  CvPlan plan;
  plan.n_folds = 5;
  plan.holdout_per_group = 2;
  plan.seed = 99;
  const auto folds = make_folds(g, plan);
  REQUIRE(folds.size() == 5);

  std::set<int> seen;
  for (const auto& fold : folds) {
    CHECK(fold.size() == 12);  // 2 rows from each of 6 groups
    std::vector<int> per_group(6, 0);
    for (const int i : fold) {
      CHECK(seen.insert(i).second);  // disjoint
      ++per_group[g.group_of[i]];
    }
    for (int c : per_group) CHECK(c == 2);
    CHECK(std::is_sorted(fold.begin(), fold.end()));
  }
  CHECK(seen.size() == 60);  // complete

  // deterministic in the seed
  CHECK(make_folds(g, plan) == folds);
  CvPlan other = plan;
  other.seed = 100;
  CHECK(make_folds(g, other) != folds);
}

TEST_CASE("leftover rows are dealt without breaking the partition") {
  GroupDesign g;
  g.n_groups = 2;
  for (int i = 0; i < 10; ++i) g.group_of.push_back(0);
  for (int i = 0; i < 13; ++i) g.group_of.push_back(1);
  CvPlan plan;
  plan.n_folds = 5;
  plan.holdout_per_group = 2;
  const auto folds = make_folds(g, plan);

  std::set<int> seen;
  for (const auto& fold : folds) {
    std::vector<int> per_group(2, 0);
    for (const int i : fold) {
      CHECK(seen.insert(i).second);
      ++per_group[g.group_of[i]];
    }
    CHECK(per_group[0] == 2);
    CHECK(per_group[1] >= 2);
    CHECK(per_group[1] <= 3);
  }
  CHECK(seen.size() == 23);
}

TEST_CASE("infeasible holdout requests are rejected") {
  const GroupDesign g = block_design(4, 5);
  CvPlan plan;
  plan.n_folds = 3;
  plan.holdout_per_group = 2;  // needs 6 rows, groups have 5
  CHECK_THROWS_AS(make_folds(g, plan), UserError);
  plan.n_folds = 1;
  CHECK_THROWS_AS(make_folds(g, plan), UserError);
}

TEST_CASE("fold error against a direct computation") {
  Vec y(6), yhat(6), varhat(6);
  y << 1, 2, 3, 4, 5, 6;
  yhat.setConstant(3.0);
  varhat.setConstant(4.0);
  const std::vector<std::vector<int>> folds = {{0, 1, 2}, {3, 4, 5}};

  // raw: mean of sqrt(mean squared error) per fold
  const double f1 = std::sqrt((4.0 + 1.0 + 0.0) / 3.0);
  const double f2 = std::sqrt((1.0 + 4.0 + 9.0) / 3.0);
  CHECK(fold_error(y, yhat, varhat, folds, false) ==
        doctest::Approx(0.5 * (f1 + f2)).epsilon(1e-12));
  // standardised: squared errors divided by the predicted variance
  CHECK(fold_error(y, yhat, varhat, folds, true) ==
        doctest::Approx(0.5 * (f1 + f2) / 2.0).epsilon(1e-12));
  // perfect predictions
  CHECK(fold_error(y, y, varhat, folds, false) == 0.0);

  // a non-finite prediction drops its fold, not the whole estimate
  Vec partial = yhat;
  partial[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK(fold_error(y, partial, varhat, folds, false) ==
        doctest::Approx(f2).epsilon(1e-12));
  // no usable fold at all
  const Vec all_nan =
      Vec::Constant(6, std::numeric_limits<double>::quiet_NaN());
  CHECK(std::isinf(fold_error(y, all_nan, varhat, folds, false)));
}

TEST_CASE("relative squared error summaries") {
  Vec t(2);
  t << 1, 0;
  Vec hit = t;
  Vec off(2);
  off << 1.1, 0;
  CHECK(mrse({hit}, t) == 0.0);
  CHECK(mrse({off}, t) == doctest::Approx(0.01).epsilon(1e-12));
  Vec off2(2);
  off2 << 1, 0.1;
  CHECK(mrse({off, off2}, t) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(mrse({}, t), UserError);
  CHECK_THROWS_AS(mrse({hit}, Vec::Zero(2)), UserError);

  Vec t2(2);
  t2 << 0, 2;
  Vec t2_off(2);
  t2_off << 0, 2.2;
  // replicate 1 misses t by 0.01, replicate 2 misses t2 by 0.04/4
  const double m = murse({{off, t2}, {hit, t2_off}}, {t, t2});
  CHECK(m == doctest::Approx(0.01).epsilon(1e-12));
  CHECK_THROWS_AS(murse({}, {t}), UserError);
  CHECK_THROWS_AS(murse({{off}}, {t, t2}), UserError);
}

TEST_CASE("cross-validation scores every fold") {
  const ModelData d = cv_data(201);
  Hyperparams hp;
  hp.K = 1;
  CvPlan plan;
  plan.seed = 7;
  const CvResult res = cv_error(d, hp, plan);
  CHECK(res.failed_folds.empty());
  CHECK(std::isfinite(res.error));
  REQUIRE(res.per_response.size() == 2);
  CHECK(res.error ==
        doctest::Approx(res.per_response.mean()).epsilon(1e-12));

  // identical response columns earn identical scores
  ModelData twin = d;
  twin.Y.col(1) = twin.Y.col(0);
  const CvResult tw = cv_error(twin, hp, plan);
  CHECK(tw.per_response[0] ==
        doctest::Approx(tw.per_response[1]).epsilon(1e-8));
}

TEST_CASE("folds that cannot converge are excluded") {
  const ModelData d = cv_data(202);
  Hyperparams hp;
  hp.K = 1;
  hp.outer_max_iter = 1;  // nothing can converge in one pass
  CvPlan plan;
  const CvResult res = cv_error(d, hp, plan);
  CHECK(res.failed_folds.size() == 5);
  CHECK(std::isinf(res.error));
}

TEST_CASE("grid cells reproduce standalone cross-validation runs") {
  const ModelData d = cv_data(203);
  CvPlan plan;
  plan.seed = 11;
  Hyperparams base;

  GridSpec grid;
  grid.K = {1, 2};
  grid.s = {0.5};
  grid.l = {1.0};
  const GridResult gr = grid_search(d, grid, plan, base);
  REQUIRE(gr.cells.size() == 2);

  for (const auto& cell : gr.cells) {
    Hyperparams hp = base;
    hp.K = cell.K;
    hp.s = cell.s;
    hp.l = cell.l;
    const CvResult cv = cv_error(d, hp, plan);
    CHECK(cell.error == doctest::Approx(cv.error).epsilon(1e-6));
  }
  CHECK(gr.best_error ==
        doctest::Approx(std::min(gr.cells[0].error, gr.cells[1].error))
            .epsilon(1e-12));
}

TEST_CASE("ties between equivalent component counts pick the smaller model") {
  // rank of X is 3: K = 5 reuses the K = 3 predictions exactly,
  // so the errors tie and the smaller K must win
  const ModelData d = cv_data(204, 10, 10, 3);
  CvPlan plan;
  plan.seed = 13;
  Hyperparams base;
  base.psi_gain_tol = -1e300;

  GridSpec grid;
  grid.K = {3, 5};
  grid.s = {0.5};
  grid.l = {1.0};
  const GridResult gr = grid_search(d, grid, plan, base);
  REQUIRE(gr.cells.size() == 2);
  CHECK(gr.cells[0].error == gr.cells[1].error);  // bitwise reuse
  CHECK(gr.K_star == 3);
}

TEST_CASE("a hopeless grid reports failure") {
  const ModelData d = cv_data(205);
  CvPlan plan;
  Hyperparams base;
  base.outer_max_iter = 1;
  GridSpec grid;
  grid.K = {1};
  grid.s = {0.5};
  grid.l = {1.0};
  CHECK_THROWS_AS(grid_search(d, grid, plan, base), NumericalError);
  GridSpec empty;
  empty.K = {};
  CHECK_THROWS_AS(grid_search(d, empty, plan, base), UserError);
}

TEST_CASE("latent agreement metrics") {
  Rng rng = make_rng(206);
  const int n = 400, p = 3;
  const Mat X = random_matrix(rng, n, p);
  const Vec latent = X.col(0);

  FittedModel m;
  m.F.resize(n, 1);
  m.F.col(0) = 2.5 * latent;  // correlation is scale invariant
  m.gamma = Mat::Zero(1, 1);
  m.beta.resize(1, p);
  m.beta << 1.0, -0.5, 0.0;
  m.beta0 = Vec::Constant(1, 0.3);

  Mat latents(n, 2);
  latents.col(0) = latent;
  latents.col(1) = random_matrix(rng, n, 1).col(0);  // unrelated noise

  Mat targets(n, 1);
  targets.col(0) = X * m.beta.row(0).transpose() + Vec::Constant(n, 0.3);

  const LatentMetrics lm = latent_metrics(m, X, latents, targets);
  CHECK(lm.cor[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(lm.cor[1] < 0.2);
  CHECK(lm.err[0] == doctest::Approx(0.0).scale(1.0));

  // shifted target: relative squared error computed directly
  Mat target2 = targets;
  target2.col(0).array() += 1.0;
  const LatentMetrics lm2 = latent_metrics(m, X, latents, target2);
  const Vec fitted = X * m.beta.row(0).transpose() + Vec::Constant(n, 0.3);
  const double expect = (fitted - target2.col(0)).squaredNorm() /
                        target2.col(0).squaredNorm();
  CHECK(lm2.err[0] == doctest::Approx(expect).epsilon(1e-12));
}
