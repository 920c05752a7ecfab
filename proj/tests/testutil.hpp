#pragma once

// Shared test oracles: central-difference gradient checking, naive reference
// implementations, and single-bin DFT amplitude measurement.

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "vlfsig/rng.hpp"
#include "vlfsig/tensor.hpp"

namespace testutil {

using vlfsig::Graph;
using vlfsig::Tensor;

struct GradCheckReport {
    double max_rel = 0.0;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    bool ok = true;
};

inline bool grads_match(double analytic, double fd, double rel_tol, double abs_tol,
                        double small = 1e-6) {
    const double mag = std::max(std::abs(analytic), std::abs(fd));
    if (mag < small) return std::abs(analytic - fd) < abs_tol;
    return std::abs(analytic - fd) / mag < rel_tol;
}

// build must construct the loss from scratch on each call (pure in the leaf
// values). Leaves carry requires_grad; every element is perturbed.
inline GradCheckReport gradcheck(const std::function<Tensor(Graph&)>& build,
                                 std::vector<Tensor> leaves, double h = 1e-5,
                                 double rel_tol = 1e-5, double abs_tol = 1e-7) {
    GradCheckReport report;
    std::vector<std::vector<double>> analytic;
    {
        for (auto& leaf : leaves) leaf.zero_grad();
        Graph g;
        Tensor loss = build(g);
        g.backward(loss);
        for (auto& leaf : leaves)
            analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
    }
    const auto eval = [&]() {
        Graph g(false);
        return build(g).item();
    };
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        auto vals = leaves[l].values_mut();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double v = vals[i];
            vals[i] = v + h;
            const double up = eval();
            vals[i] = v - h;
            const double dn = eval();
            vals[i] = v;
            const double fd = (up - dn) / (2.0 * h);
            const double an = analytic[l][i];
            const double mag = std::max(std::abs(an), std::abs(fd));
            const double rel = mag > 0 ? std::abs(an - fd) / mag : 0.0;
            if (rel > report.max_rel && mag >= 1e-6) {
                report.max_rel = rel;
                report.worst_analytic = an;
                report.worst_fd = fd;
            }
            if (!grads_match(an, fd, rel_tol, abs_tol)) report.ok = false;
        }
    }
    return report;
}

inline Tensor random_tensor(vlfsig::Shape shape, vlfsig::Rng& rng, bool requires_grad = true,
                            double scale = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(vlfsig::shape_numel(shape)));
    for (auto& x : v) x = rng.uniform(-scale, scale);
    return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

// Weighted sum readout so every output element influences the scalar loss.
inline Tensor weighted_sum(Graph& g, const Tensor& y, const Tensor& weights) {
    return g.scale(g.mean(g.mul(y, weights)), static_cast<double>(y.size()));
}

inline std::vector<double> naive_matmul(std::span<const double> a, std::span<const double> b,
                                        int m, int k, int n) {
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[p * n + j];
    return c;
}

// Sliding dot product with zero padding; the hand oracle for conv1d.
inline std::vector<double> naive_conv1d(std::span<const double> x, int cin, int len,
                                        std::span<const double> w, int cout, int ksz,
                                        std::span<const double> bias, int stride, int pad_left,
                                        int pad_right) {
    const int lout = (len + pad_left + pad_right - ksz) / stride + 1;
    std::vector<double> y(static_cast<std::size_t>(cout) * lout);
    for (int co = 0; co < cout; ++co)
        for (int j = 0; j < lout; ++j) {
            double s = bias[static_cast<std::size_t>(co)];
            for (int ci = 0; ci < cin; ++ci)
                for (int t = 0; t < ksz; ++t) {
                    const int idx = j * stride + t - pad_left;
                    if (idx >= 0 && idx < len)
                        s += w[(co * cin + ci) * ksz + t] * x[ci * len + idx];
                }
            y[static_cast<std::size_t>(co) * lout + j] = s;
        }
    return y;
}

// Amplitude of the component at freq_hz via a single DFT bin.
inline double dft_amplitude(std::span<const double> x, double freq_hz, double sample_rate_hz) {
    double re = 0.0, im = 0.0;
    const double w = 2.0 * 3.14159265358979323846 * freq_hz / sample_rate_hz;
    for (std::size_t n = 0; n < x.size(); ++n) {
        re += x[n] * std::cos(w * static_cast<double>(n));
        im -= x[n] * std::sin(w * static_cast<double>(n));
    }
    const double scale = freq_hz == 0.0 ? 1.0 : 2.0;
    return scale * std::sqrt(re * re + im * im) / static_cast<double>(x.size());
}

inline double db_ratio(double out_amp, double in_amp) {
    return 20.0 * std::log10(out_amp / in_amp);
}

}  // namespace testutil
