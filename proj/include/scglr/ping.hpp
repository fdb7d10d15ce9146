#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "scglr/kernels.hpp"

namespace scglr {

enum class LineSearch { Halving, NewtonArc };

struct PingOptions {
  double tol = 1e-6;        // ||v_{t+1} - v_t|| convergence threshold
  int max_iter = 200;
  int max_halvings = 60;    // cap on back-halvings per step
  LineSearch line_search = LineSearch::Halving;
  int newton_iters = 10;    // inner Newton steps on the arc
  int retries = 5;          // restarts after degenerate criterion values
  std::uint64_t perturb_seed = 0x5c91ULL;
};

struct PingIterate {
  double J = 0.0;
  double step_norm = 0.0;
  int halvings = 0;
};

struct PingResult {
  Vec u;           // maximiser in the original (u) coordinates
  double J = 0.0;  // criterion value at u
  int iterations = 0;
  bool converged = false;
  std::vector<PingIterate> trace;
};

// Projected-gradient program on the unit sphere with linear
// orthogonality constraints Delta' u = 0 under the metric whose square
// roots are given: substituting v = M^{-1/2} u turns the identification
// constraint u' M^{-1} u = 1 into ||v|| = 1 and the constraints into
// B' v = 0 with B = M^{1/2} Delta.
struct SphereProgram {
  std::function<double(const Vec&)> value;                       // J(u)
  std::function<std::pair<double, Vec>(const Vec&)> value_and_grad;
  Mat M_half;       // metric square root (u = M_half v)
  Mat M_half_inv;   // inverse square root (v = M_half_inv u)
  Mat Delta;        // r x h constraint matrix, may have zero columns
  Vec init;         // starting loading in u coordinates
  PingOptions opts;
};

// I - B (B'B)^-1 B', built from a rank-revealing QR; linearly dependent
// constraint columns are dropped (counted in `dropped` when given).
Mat orthogonality_projector(const Mat& B, int* dropped = nullptr);

// Iterates v <- line_search(v, proj grad) until the step norm falls
// under tol.  Every accepted iterate is feasible (unit norm, in the
// constraint null space) and never decreases J by more than 1e-12.
// Degenerate criterion evaluations trigger a perturbed restart, up to
// opts.retries times.
PingResult ping_solve(const SphereProgram& prog);

// Partial-least-squares starting loading: the covariance direction
// sum_k C_defl' W_k z_k, where C_defl removes the P-orthogonal projection of
// C onto the previously extracted components; normalised so that
// u0' M^-1 u0 = 1 (unit sphere in v coordinates).  Falls back to the first
// principal axis when every covariance vanishes.
Vec pls1_init(const Mat& C, const Vec& p_weights, const std::vector<Vec>& z,
              const std::vector<Vec>& w, const Mat& F_prev,
              const Mat& M_half_inv);

}  // namespace scglr
