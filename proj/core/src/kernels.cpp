#include "kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace vlfsig::kern {

namespace {

constexpr double kLog2E = 1.4426950408889634073599246810019;
constexpr double kLn2Hi = 6.93147180369123816490e-01;
constexpr double kLn2Lo = 1.90821492927058770002e-10;
// Rounds-to-nearest shifter for |n| < 2^51.
constexpr double kShifter = 6755399441055744.0;  // 1.5 * 2^52

inline double exp_core(double x) {
    const double clamped = std::min(std::max(x, -708.0), 709.0);
    const double t = clamped * kLog2E + kShifter;
    const double dn = t - kShifter;
    const double r = (clamped - dn * kLn2Hi) - dn * kLn2Lo;

    // Taylor to r^13; |r| <= ln2/2 keeps the truncation below 1 ulp.
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;

    const std::int64_t ni = static_cast<std::int32_t>(std::bit_cast<std::uint64_t>(t));
    const double pow2n = std::bit_cast<double>(static_cast<std::uint64_t>(ni + 1023) << 52);
    const double y = p * pow2n;
    return x < -745.133 ? 0.0 : y;
}

}  // namespace

void exp_inplace(double* p, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) p[i] = exp_core(p[i]);
}

void softmax_rows_inplace(double* p, std::int64_t rows, std::int64_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols > 16384)
    for (std::int64_t r = 0; r < rows; ++r) {
        double* row = p + r * cols;
        double m = row[0];
        for (std::int64_t j = 1; j < cols; ++j) m = std::max(m, row[j]);
        for (std::int64_t j = 0; j < cols; ++j) row[j] -= m;
        exp_inplace(row, cols);
        double s = 0.0;
        for (std::int64_t j = 0; j < cols; ++j) s += row[j];
        const double inv = 1.0 / s;
        for (std::int64_t j = 0; j < cols; ++j) row[j] *= inv;
    }
}

void gemm(bool trans_a, bool trans_b, std::int64_t M, std::int64_t N, std::int64_t K,
          double alpha, const double* A, std::int64_t lda, const double* B, std::int64_t ldb,
          double* C, std::int64_t ldc, bool accumulate) {
    const bool par = M * N * K > 32768;
    if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static) if (par)
        for (std::int64_t i = 0; i < M; ++i) {
            double* crow = C + i * ldc;
            if (!accumulate) std::fill(crow, crow + N, 0.0);
            const double* arow = A + i * lda;
            for (std::int64_t k = 0; k < K; ++k) {
                const double a = alpha * arow[k];
                const double* brow = B + k * ldb;
                for (std::int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static) if (par)
        for (std::int64_t i = 0; i < M; ++i) {
            double* crow = C + i * ldc;
            const double* arow = A + i * lda;
            for (std::int64_t j = 0; j < N; ++j) {
                const double* brow = B + j * ldb;
                // Fixed 8-lane accumulation: one vector FMA per step, and the
                // summation order never depends on threading.
                double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
                std::int64_t k = 0;
                for (; k + 8 <= K; k += 8)
                    for (int l = 0; l < 8; ++l) acc[l] += arow[k + l] * brow[k + l];
                double tail = 0.0;
                for (; k < K; ++k) tail += arow[k] * brow[k];
                const double s =
                    (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                     ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail;
                crow[j] = (accumulate ? crow[j] : 0.0) + alpha * s;
            }
        }
    } else if (trans_a && !trans_b) {
        // A is [K,M]; walk k in the outer loop so both reads stay row-wise.
#pragma omp parallel for schedule(static) if (par)
        for (std::int64_t i = 0; i < M; ++i) {
            double* crow = C + i * ldc;
            if (!accumulate) std::fill(crow, crow + N, 0.0);
            for (std::int64_t k = 0; k < K; ++k) {
                const double a = alpha * A[k * lda + i];
                const double* brow = B + k * ldb;
                for (std::int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
            }
        }
    } else {
#pragma omp parallel for schedule(static) if (par)
        for (std::int64_t i = 0; i < M; ++i) {
            double* crow = C + i * ldc;
            for (std::int64_t j = 0; j < N; ++j) {
                const double* brow = B + j * ldb;
                double s = 0.0;
                for (std::int64_t k = 0; k < K; ++k) s += A[k * lda + i] * brow[k];
                crow[j] = (accumulate ? crow[j] : 0.0) + alpha * s;
            }
        }
    }
}

namespace {
// Valid output range [j0, j1) for tap k: 0 <= j*stride + k - pad_left < len.
inline void tap_range(std::int64_t k, std::int64_t pad_left, std::int64_t stride,
                      std::int64_t len, std::int64_t lout, std::int64_t& j0, std::int64_t& j1) {
    const std::int64_t off = k - pad_left;
    j0 = off >= 0 ? 0 : (-off + stride - 1) / stride;
    const std::int64_t last = len - 1 - off;
    j1 = last < 0 ? 0 : std::min(lout, last / stride + 1);
    j0 = std::min(j0, j1);
}
}  // namespace

void conv1d_forward(const double* x, std::int64_t cin, std::int64_t len, const double* w,
                    std::int64_t cout, std::int64_t ksz, const double* bias, std::int64_t stride,
                    std::int64_t pad_left, double* y, std::int64_t lout) {
#pragma omp parallel for schedule(static) if (cout * cin * ksz * lout > 16384)
    for (std::int64_t co = 0; co < cout; ++co) {
        double* yrow = y + co * lout;
        std::fill(yrow, yrow + lout, bias ? bias[co] : 0.0);
        for (std::int64_t ci = 0; ci < cin; ++ci) {
            const double* xrow = x + ci * len;
            const double* wrow = w + (co * cin + ci) * ksz;
            const auto edge = [&](std::int64_t jb, std::int64_t je) {
                for (std::int64_t k = 0; k < ksz; ++k) {
                    const double wk = wrow[k];
                    std::int64_t j0, j1;
                    tap_range(k, pad_left, stride, len, lout, j0, j1);
                    j0 = std::max(j0, jb);
                    j1 = std::min(j1, je);
                    for (std::int64_t j = j0; j < j1; ++j)
                        yrow[j] += wk * xrow[j * stride + k - pad_left];
                }
            };
            if (stride == 1 && ksz == 3) {
                // single fused pass over the interior, edges handled per tap
                const std::int64_t jlo = std::min(lout, std::max<std::int64_t>(0, pad_left));
                const std::int64_t jhi = std::max(jlo, std::min(lout, len + pad_left - 2));
                const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
                const double* xs = xrow - pad_left;
                for (std::int64_t j = jlo; j < jhi; ++j)
                    yrow[j] += w0 * xs[j] + w1 * xs[j + 1] + w2 * xs[j + 2];
                edge(0, jlo);
                edge(jhi, lout);
            } else {
                edge(0, lout);
            }
        }
    }
}

void conv1d_backward_x(const double* dy, std::int64_t cout, std::int64_t lout, const double* w,
                       std::int64_t cin, std::int64_t ksz, std::int64_t stride,
                       std::int64_t pad_left, double* dx, std::int64_t len) {
#pragma omp parallel for schedule(static) if (cout * cin * ksz * lout > 16384)
    for (std::int64_t ci = 0; ci < cin; ++ci) {
        double* dxrow = dx + ci * len;
        for (std::int64_t co = 0; co < cout; ++co) {
            const double* dyrow = dy + co * lout;
            const double* wrow = w + (co * cin + ci) * ksz;
            if (stride == 1 && ksz == 3) {
                // correlation form: dx[t] += sum_k w[k] * dy[t + pad_left - k]
                const std::int64_t tlo =
                    std::min(len, std::max<std::int64_t>(0, 2 - pad_left));
                const std::int64_t thi = std::max(tlo, std::min(len, lout - pad_left));
                const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
                const double* ds = dyrow + pad_left;
                for (std::int64_t t = tlo; t < thi; ++t)
                    dxrow[t] += w0 * ds[t] + w1 * ds[t - 1] + w2 * ds[t - 2];
                const auto edge_t = [&](std::int64_t tb, std::int64_t te) {
                    for (std::int64_t t = tb; t < te; ++t) {
                        double s = 0.0;
                        for (std::int64_t k = 0; k < 3; ++k) {
                            const std::int64_t j = t + pad_left - k;
                            if (j >= 0 && j < lout) s += wrow[k] * dyrow[j];
                        }
                        dxrow[t] += s;
                    }
                };
                edge_t(0, tlo);
                edge_t(thi, len);
            } else {
                for (std::int64_t k = 0; k < ksz; ++k) {
                    const double wk = wrow[k];
                    std::int64_t j0, j1;
                    tap_range(k, pad_left, stride, len, lout, j0, j1);
                    for (std::int64_t j = j0; j < j1; ++j)
                        dxrow[j * stride + k - pad_left] += wk * dyrow[j];
                }
            }
        }
    }
}

void conv1d_backward_w(const double* dy, std::int64_t cout, std::int64_t lout, const double* x,
                       std::int64_t cin, std::int64_t len, std::int64_t ksz, std::int64_t stride,
                       std::int64_t pad_left, double* dw) {
#pragma omp parallel for schedule(static) if (cout * cin * ksz * lout > 16384)
    for (std::int64_t co = 0; co < cout; ++co) {
        const double* dyrow = dy + co * lout;
        for (std::int64_t ci = 0; ci < cin; ++ci) {
            const double* xrow = x + ci * len;
            double* wrow = dw + (co * cin + ci) * ksz;
            for (std::int64_t k = 0; k < ksz; ++k) {
                std::int64_t j0, j1;
                tap_range(k, pad_left, stride, len, lout, j0, j1);
                const double* xs = xrow + j0 * stride + k - pad_left;
                const std::int64_t n = j1 - j0;
                double s;
                if (stride == 1) {
                    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
                    std::int64_t j = 0;
                    for (; j + 8 <= n; j += 8)
                        for (int l = 0; l < 8; ++l) acc[l] += dyrow[j0 + j + l] * xs[j + l];
                    double tail = 0.0;
                    for (; j < n; ++j) tail += dyrow[j0 + j] * xs[j];
                    s = (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                         ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail;
                } else {
                    s = 0.0;
                    for (std::int64_t j = 0; j < n; ++j) s += dyrow[j0 + j] * xs[j * stride];
                }
                wrow[k] += s;
            }
        }
    }
}

void conv1d_backward_b(const double* dy, std::int64_t cout, std::int64_t lout, double* db) {
#pragma omp parallel for schedule(static) if (cout * lout > 65536)
    for (std::int64_t co = 0; co < cout; ++co) {
        const double* dyrow = dy + co * lout;
        double s = 0.0;
        for (std::int64_t j = 0; j < lout; ++j) s += dyrow[j];
        db[co] += s;
    }
}

}  // namespace vlfsig::kern
