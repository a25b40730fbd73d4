#include "interaction/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace interaction::kernels {

namespace {

// Row kernels shared by the serial and parallel drivers. Keeping a single
// body per row is what makes the two drivers agree bit for bit.

inline void matmul_row(const double* __restrict a, const double* __restrict b,
                       double* __restrict c, int i, int k, int n,
                       bool accumulate) {
  double* crow = c + static_cast<std::size_t>(i) * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  const double* arow = a + static_cast<std::size_t>(i) * k;
  for (int p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, int i, int k, int n,
                          bool accumulate) {
  const double* arow = a + static_cast<std::size_t>(i) * k;
  double* crow = c + static_cast<std::size_t>(i) * n;
  for (int j = 0; j < n; ++j) {
    const double* brow = b + static_cast<std::size_t>(j) * k;
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
    crow[j] = accumulate ? crow[j] + acc : acc;
  }
}

inline void matmul_tn_row(const double* __restrict a, const double* __restrict b,
                          double* __restrict c, int i, int m, int k,
                          int n, bool accumulate) {
  double* crow = c + static_cast<std::size_t>(i) * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  for (int p = 0; p < k; ++p) {
    const double av = a[static_cast<std::size_t>(p) * m + i];
    if (av == 0.0) continue;
    const double* brow = b + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void softmax_row(const double* x, const double* mask, double* y, int r, int cols) {
  const std::size_t off = static_cast<std::size_t>(r) * cols;
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < cols; ++j) {
    const double v = x[off + j] + (mask ? mask[off + j] : 0.0);
    y[off + j] = v;
    mx = std::max(mx, v);
  }
  if (mx == -std::numeric_limits<double>::infinity()) {
    // Fully masked row: define the output as all zeros.
    std::fill(y + off, y + off + cols, 0.0);
    return;
  }
  double sum = 0.0;
  for (int j = 0; j < cols; ++j) {
    const double e = std::exp(y[off + j] - mx);
    y[off + j] = e;
    sum += e;
  }
  const double inv = 1.0 / sum;
  for (int j = 0; j < cols; ++j) y[off + j] *= inv;
}

inline bool worth_threading(std::size_t work) { return work >= kParallelThreshold; }

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            int m, int k, int n, bool accumulate) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (worth_threading(work))
  for (int i = 0; i < m; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, n, accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (worth_threading(work))
  for (int i = 0; i < m; ++i) matmul_nt_row(a.data(), b.data(), c.data(), i, k, n, accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate) {
  const std::size_t work = static_cast<std::size_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (worth_threading(work))
  for (int i = 0; i < m; ++i)
    matmul_tn_row(a.data(), b.data(), c.data(), i, m, k, n, accumulate);
}

void softmax_rows(std::span<const double> x, std::span<const double> additive_mask,
                  std::span<double> y, int rows, int cols) {
  const double* mask = additive_mask.empty() ? nullptr : additive_mask.data();
  const std::size_t work = static_cast<std::size_t>(rows) * cols * 8;
#pragma omp parallel for schedule(static) if (worth_threading(work))
  for (int r = 0; r < rows; ++r) softmax_row(x.data(), mask, y.data(), r, cols);
}

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, n, accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) matmul_nt_row(a.data(), b.data(), c.data(), i, k, n, accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i)
    matmul_tn_row(a.data(), b.data(), c.data(), i, m, k, n, accumulate);
}

void softmax_rows(std::span<const double> x, std::span<const double> additive_mask,
                  std::span<double> y, int rows, int cols) {
  const double* mask = additive_mask.empty() ? nullptr : additive_mask.data();
  for (int r = 0; r < rows; ++r) softmax_row(x.data(), mask, y.data(), r, cols);
}

}  // namespace reference

}  // namespace interaction::kernels
