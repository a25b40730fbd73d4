#pragma once

// Dense row-major kernels used by the autograd layer.
//
// Every kernel exists twice: the OpenMP version in `interaction::kernels`
// and a single-threaded version in `interaction::kernels::reference`. Both
// compute each output element with the same summation order, so their
// results are bit-identical for any thread count. Tests rely on that.

#include <cstddef>
#include <span>

namespace interaction::kernels {

// Outputs must not alias inputs.

// Below this many multiply-adds a kernel runs on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

// C[m x n] (+)= A[m x k] * B[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            int m, int k, int n, bool accumulate = false);

// C[m x n] (+)= A[m x k] * B[n x k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate = false);

// C[m x n] (+)= A[k x m]^T * B[k x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate = false);

// Row-wise softmax of x[rows x cols] into y. `additive_mask` is either empty
// or rows*cols entries added to x before normalisation (use -inf to mask).
void softmax_rows(std::span<const double> x, std::span<const double> additive_mask,
                  std::span<double> y, int rows, int cols);

namespace reference {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            int m, int k, int n, bool accumulate = false);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate = false);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               int m, int k, int n, bool accumulate = false);
void softmax_rows(std::span<const double> x, std::span<const double> additive_mask,
                  std::span<double> y, int rows, int cols);

}  // namespace reference

}  // namespace interaction::kernels
