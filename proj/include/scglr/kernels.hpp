#pragma once

#include <Eigen/Dense>

namespace scglr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Execution policy for the data-parallel kernels.  Parallel results are
// bit-identical for any thread count: work is split into fixed-size row
// chunks whose partial results are reduced serially in chunk order, so
// only the (fixed) chunking, never the scheduling, affects rounding.
enum class Exec { Serial, Parallel };

// Number of rows per reduction chunk.  A compile-time constant so that
// serial and parallel runs of the chunked path agree bit-for-bit.
inline constexpr int kChunkRows = 256;

// B' diag(w) B, symmetric m x m.
Mat weighted_gram(const Mat& B, const Vec& w, Exec exec);

// B' diag(w) Z, m x k.
Mat weighted_cross(const Mat& B, const Vec& w, const Mat& Z, Exec exec);

// sum_i w_i * a_i * b_i.
double weighted_dot(const Vec& a, const Vec& w, const Vec& b, Exec exec);

// Threads used by the parallel policy (1 when OpenMP is unavailable).
int max_threads();

// Cap the number of OpenMP threads for the whole process; values < 1
// leave the runtime default in place.
void set_job_cap(int jobs);

}  // namespace scglr
