#pragma once

// Hot numeric kernels behind the tensor ops. Loops are written so every
// output element is produced by exactly one iteration with a fixed serial
// reduction inside it; OpenMP splits never change the arithmetic, so results
// are bit-identical at any thread count.

#include <cstdint>
#include <cstring>

namespace vlfsig::kern {

// Vectorizable exp for x in [-inf, 709]; inputs below -745.1 flush to 0.
// Cody-Waite reduction + degree-13 Taylor on [-ln2/2, ln2/2]; max error a
// few ulps, which the softmax/CE tolerances absorb.
void exp_inplace(double* p, std::int64_t n);

// C[M,N] = (accumulate ? C : 0) + alpha * op(A)·op(B)
// op(A) is [M,K] (A itself is [K,M] when trans_a), likewise for B.
// Row-major with leading dimensions lda/ldb/ldc.
void gemm(bool trans_a, bool trans_b, std::int64_t M, std::int64_t N, std::int64_t K,
          double alpha, const double* A, std::int64_t lda, const double* B, std::int64_t ldb,
          double* C, std::int64_t ldc, bool accumulate);

// y[co,j] = bias[co] + sum_{ci,k} w[co,ci,k] * x[ci, j*stride + k - pad_left]
// Out-of-range taps read zero. Caller fixes Lout.
void conv1d_forward(const double* x, std::int64_t cin, std::int64_t len, const double* w,
                    std::int64_t cout, std::int64_t ksz, const double* bias, std::int64_t stride,
                    std::int64_t pad_left, double* y, std::int64_t lout);

// dx += w-correlated dy; dw += x-correlated dy; db += row sums of dy.
void conv1d_backward_x(const double* dy, std::int64_t cout, std::int64_t lout, const double* w,
                       std::int64_t cin, std::int64_t ksz, std::int64_t stride,
                       std::int64_t pad_left, double* dx, std::int64_t len);
void conv1d_backward_w(const double* dy, std::int64_t cout, std::int64_t lout, const double* x,
                       std::int64_t cin, std::int64_t len, std::int64_t ksz, std::int64_t stride,
                       std::int64_t pad_left, double* dw);
void conv1d_backward_b(const double* dy, std::int64_t cout, std::int64_t lout, double* db);

// In-place row-wise stabilized softmax on an [rows, cols] buffer.
void softmax_rows_inplace(double* p, std::int64_t rows, std::int64_t cols);

}  // namespace vlfsig::kern
