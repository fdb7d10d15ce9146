// Times the parallel kernels against their serial reference paths on a
// synthetic problem large enough to show the difference.  Run directly;
// not part of the test suite.

#include <chrono>
#include <cstdio>
#include <random>

#include "scglr/kernels.hpp"
#include "scglr/relevance.hpp"
#include "scglr/rng.hpp"

using namespace scglr;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_ms(int reps, F&& body) {
  body();  // warm up
  const double t0 = now_ms();
  for (int r = 0; r < reps; ++r) body();
  return (now_ms() - t0) / reps;
}

Mat random_matrix(Rng& rng, int n, int m) {
  std::normal_distribution<double> d(0.0, 1.0);
  Mat out(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = d(rng);
  return out;
}

}  // namespace

int main() {
  Rng rng = make_rng(42);
  const int n = 40000, m = 64, q = 8;

  const Mat B = random_matrix(rng, n, m);
  const Mat Z = random_matrix(rng, n, q);
  Vec w(n);
  {
    std::uniform_real_distribution<double> d(0.5, 2.0);
    for (int i = 0; i < n; ++i) w[i] = d(rng);
  }

  std::printf("threads available: %d\n\n", max_threads());
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "parallel",
              "speedup");

  const double g_ser =
      time_ms(5, [&] { volatile double s = weighted_gram(B, w, Exec::Serial)(0, 0); (void)s; });
  const double g_par =
      time_ms(5, [&] { volatile double s = weighted_gram(B, w, Exec::Parallel)(0, 0); (void)s; });
  std::printf("%-28s %10.2f %10.2f %7.2fx\n", "weighted_gram 40000x64", g_ser,
              g_par, g_ser / g_par);

  const double c_ser = time_ms(
      5, [&] { volatile double s = weighted_cross(B, w, Z, Exec::Serial)(0, 0); (void)s; });
  const double c_par = time_ms(
      5, [&] { volatile double s = weighted_cross(B, w, Z, Exec::Parallel)(0, 0); (void)s; });
  std::printf("%-28s %10.2f %10.2f %7.2fx\n", "weighted_cross 40000x64x8",
              c_ser, c_par, c_ser / c_par);

  // criterion evaluation: reduced-coordinate production route vs the
  // observation-space reference, both exercising the same state
  {
    const int nn = 20000, p = 120, r = 40;
    const Mat X = random_matrix(rng, nn, p);
    const Mat C = random_matrix(rng, nn, r);
    const Vec pw = Vec::Constant(nn, 1.0 / nn);
    Mat A = random_matrix(rng, nn, 3);
    std::vector<Vec> z(2), ww(2);
    for (int k = 0; k < 2; ++k) {
      z[k] = random_matrix(rng, nn, 1);
      ww[k] = Vec::Constant(nn, 1.0);
    }
    Vec u = Vec::Ones(r) / std::sqrt(static_cast<double>(r));

    CriterionContext ser(C, X, pw, Vec(), 2.0, 0.5, Exec::Serial);
    ser.set_extraction_state(A, z, ww);
    CriterionContext par(C, X, pw, Vec(), 2.0, 0.5, Exec::Parallel);
    par.set_extraction_state(A, z, ww);

    const double j_ser =
        time_ms(20, [&] { volatile double s = ser.combined_with_grad(u).first; (void)s; });
    const double j_par =
        time_ms(20, [&] { volatile double s = par.combined_with_grad(u).first; (void)s; });
    std::printf("%-28s %10.3f %10.3f %7.2fx\n", "criterion+grad p=120 r=40",
                j_ser, j_par, j_ser / j_par);

    const double psi_fast =
        time_ms(20, [&] { volatile double s = par.goodness_of_fit(u); (void)s; });
    const double psi_ref =
        time_ms(20, [&] { volatile double s = par.goodness_of_fit_reference(u); (void)s; });
    std::printf("%-28s %10.3f %10.3f %7.2fx  (reference vs reduced)\n",
                "fit factor n=20000", psi_ref, psi_fast, psi_ref / psi_fast);
  }
  return 0;
}
