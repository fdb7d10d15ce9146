#include "scglr/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scglr {

namespace {

inline int chunk_count(int n) { return (n + kChunkRows - 1) / kChunkRows; }

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_job_cap(int jobs) {
#ifdef _OPENMP
  if (jobs >= 1) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

Mat weighted_gram(const Mat& B, const Vec& w, Exec exec) {
  const int n = static_cast<int>(B.rows());
  const int m = static_cast<int>(B.cols());
  if (exec == Exec::Serial) {
    return B.transpose() * w.asDiagonal() * B;
  }
  const int nc = chunk_count(n);
  std::vector<Mat> partial(nc);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c) {
    const int lo = c * kChunkRows;
    const int len = std::min(kChunkRows, n - lo);
    const auto Bc = B.middleRows(lo, len);
    partial[c].noalias() = Bc.transpose() * w.segment(lo, len).asDiagonal() * Bc;
  }
  Mat out = Mat::Zero(m, m);
  for (int c = 0; c < nc; ++c) out += partial[c];
  return out;
}

Mat weighted_cross(const Mat& B, const Vec& w, const Mat& Z, Exec exec) {
  const int n = static_cast<int>(B.rows());
  const int m = static_cast<int>(B.cols());
  const int k = static_cast<int>(Z.cols());
  if (exec == Exec::Serial) {
    return B.transpose() * w.asDiagonal() * Z;
  }
  const int nc = chunk_count(n);
  std::vector<Mat> partial(nc);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c) {
    const int lo = c * kChunkRows;
    const int len = std::min(kChunkRows, n - lo);
    partial[c].noalias() = B.middleRows(lo, len).transpose() *
                           w.segment(lo, len).asDiagonal() *
                           Z.middleRows(lo, len);
  }
  Mat out = Mat::Zero(m, k);
  for (int c = 0; c < nc; ++c) out += partial[c];
  return out;
}

double weighted_dot(const Vec& a, const Vec& w, const Vec& b, Exec exec) {
  const int n = static_cast<int>(a.size());
  if (exec == Exec::Serial) {
    return (a.array() * w.array() * b.array()).sum();
  }
  const int nc = chunk_count(n);
  std::vector<double> partial(nc, 0.0);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < nc; ++c) {
    const int lo = c * kChunkRows;
    const int len = std::min(kChunkRows, n - lo);
    partial[c] = (a.segment(lo, len).array() * w.segment(lo, len).array() *
                  b.segment(lo, len).array())
                     .sum();
  }
  double out = 0.0;
  for (int c = 0; c < nc; ++c) out += partial[c];
  return out;
}

}  // namespace scglr
