#include "vlfsig/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "vlfsig/errors.hpp"

namespace vlfsig::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void FilterSpec::validate() const {
    if (sample_rate_hz <= 0) throw ConfigError("sample_rate_hz must be positive");
    const double nyquist = sample_rate_hz / 2.0;
    if (lowpass_cutoff_hz <= 0 || lowpass_cutoff_hz >= nyquist)
        throw ConfigError("lowpass cutoff must lie in (0, sample_rate/2)");
    if (lowpass_order < 2 || lowpass_order % 2 != 0)
        throw ConfigError("lowpass order must be a positive even number");
    if (notch_base_hz <= 0) throw ConfigError("notch base frequency must be positive");
    if (notch_harmonics < 0) throw ConfigError("notch_harmonics must be non-negative");
    if (notch_base_hz * notch_harmonics >= nyquist)
        throw ConfigError("highest notch frequency must stay below sample_rate/2");
    if (notch_q <= 0) throw ConfigError("notch_q must be positive");
}

bool Biquad::stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }

double Biquad::max_pole_radius() const {
    const double disc = a1 * a1 - 4.0 * a2;
    if (disc >= 0.0) {
        const double r1 = std::abs((-a1 + std::sqrt(disc)) / 2.0);
        const double r2 = std::abs((-a1 - std::sqrt(disc)) / 2.0);
        return std::max(r1, r2);
    }
    return std::sqrt(a2);  // complex pair radius
}

BiquadCascade BiquadCascade::butterworth_lowpass(double cutoff_hz, double sample_rate_hz,
                                                 int order) {
    if (order < 2 || order % 2 != 0) throw ConfigError("butterworth order must be even");
    BiquadCascade c;
    const double w0 = 2.0 * kPi * cutoff_hz / sample_rate_hz;
    const double cw = std::cos(w0), sw = std::sin(w0);
    for (int k = 0; k < order / 2; ++k) {
        // Butterworth pole pair angles: q = 1 / (2 cos(theta_k)).
        const double theta = kPi * (2.0 * k + 1.0) / (2.0 * order);
        const double q = 1.0 / (2.0 * std::cos(theta));
        const double alpha = sw / (2.0 * q);
        const double a0 = 1.0 + alpha;
        Biquad s;
        s.b0 = (1.0 - cw) / 2.0 / a0;
        s.b1 = (1.0 - cw) / a0;
        s.b2 = s.b0;
        s.a1 = -2.0 * cw / a0;
        s.a2 = (1.0 - alpha) / a0;
        c.append(s);
    }
    return c;
}

Biquad BiquadCascade::notch(double freq_hz, double sample_rate_hz, double q) {
    const double w0 = 2.0 * kPi * freq_hz / sample_rate_hz;
    const double cw = std::cos(w0), sw = std::sin(w0);
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * cw / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * cw / a0;
    s.a2 = (1.0 - alpha) / a0;
    return s;
}

bool BiquadCascade::stable() const {
    return std::all_of(sections_.begin(), sections_.end(),
                       [](const Biquad& s) { return s.stable(); });
}

long BiquadCascade::settling_samples(double tol) const {
    double r = 0.0;
    for (const auto& s : sections_) r = std::max(r, s.max_pole_radius());
    if (r <= 0.0) return 1;
    if (r >= 1.0) throw StateError("settling length undefined for an unstable cascade");
    const double n = std::log(tol) / std::log(r);
    return std::max(1L, static_cast<long>(std::ceil(n)));
}

std::vector<double> BiquadCascade::filter(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    for (const auto& s : sections_) {
        double x1 = 0, x2 = 0, y1 = 0, y2 = 0;  // direct form I state
        for (auto& v : y) {
            const double x0 = v;
            const double y0 = s.b0 * x0 + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            v = y0;
        }
    }
    return y;
}

namespace {

// Folded (billiard) reflection about the edge samples; handles pads longer
// than the signal.
inline std::size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    long m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - m;
    return static_cast<std::size_t>(m);
}

}  // namespace

std::vector<double> BiquadCascade::filtfilt(std::span<const double> x) const {
    if (x.empty()) return {};
    if (sections_.empty()) return {x.begin(), x.end()};
    const long n = static_cast<long>(x.size());
    const long pad = 3 * settling_samples();
    std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
    for (long i = 0; i < n + 2 * pad; ++i)
        ext[static_cast<std::size_t>(i)] = x[reflect_index(i - pad, n)];

    std::vector<double> fwd = filter(ext);
    std::reverse(fwd.begin(), fwd.end());
    std::vector<double> bwd = filter(fwd);
    std::reverse(bwd.begin(), bwd.end());

    return {bwd.begin() + pad, bwd.begin() + pad + n};
}

std::vector<double> remove_dc(std::span<const double> x) {
    if (x.empty()) throw ConfigError("remove_dc of an empty signal");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - mean;
    return y;
}

std::vector<double> lowpass(std::span<const double> x, const FilterSpec& spec) {
    spec.validate();
    return BiquadCascade::butterworth_lowpass(spec.lowpass_cutoff_hz, spec.sample_rate_hz,
                                              spec.lowpass_order)
        .filtfilt(x);
}

std::vector<double> notch_comb(std::span<const double> x, const FilterSpec& spec) {
    spec.validate();
    BiquadCascade c;
    for (int k = 1; k <= spec.notch_harmonics; ++k)
        c.append(BiquadCascade::notch(spec.notch_base_hz * k, spec.sample_rate_hz, spec.notch_q));
    return c.filtfilt(x);
}

std::vector<double> preprocess(std::span<const double> x, const FilterSpec& spec) {
    return notch_comb(lowpass(remove_dc(x), spec), spec);
}

std::vector<std::vector<double>> correlation_heatmap(std::span<const double> x, int window_len,
                                                     int stride) {
    if (window_len < 1 || window_len > static_cast<int>(x.size()))
        throw ConfigError("correlation window must fit inside the signal");
    if (stride < 1) throw ConfigError("correlation stride must be >= 1");
    const int n_windows = static_cast<int>((x.size() - static_cast<std::size_t>(window_len)) /
                                           static_cast<std::size_t>(stride)) +
                          1;
    // Per-window mean and centered norm.
    std::vector<double> mean(static_cast<std::size_t>(n_windows));
    std::vector<double> norm(static_cast<std::size_t>(n_windows));
    for (int i = 0; i < n_windows; ++i) {
        const double* w = x.data() + static_cast<std::size_t>(i) * stride;
        double m = 0.0;
        for (int t = 0; t < window_len; ++t) m += w[t];
        m /= window_len;
        double ss = 0.0;
        for (int t = 0; t < window_len; ++t) ss += (w[t] - m) * (w[t] - m);
        mean[static_cast<std::size_t>(i)] = m;
        norm[static_cast<std::size_t>(i)] = std::sqrt(ss);
    }
    std::vector<std::vector<double>> M(static_cast<std::size_t>(n_windows),
                                       std::vector<double>(static_cast<std::size_t>(n_windows)));
    for (int i = 0; i < n_windows; ++i) {
        M[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
        for (int j = i + 1; j < n_windows; ++j) {
            double r = 0.0;
            if (norm[static_cast<std::size_t>(i)] > 0 && norm[static_cast<std::size_t>(j)] > 0) {
                const double* wi = x.data() + static_cast<std::size_t>(i) * stride;
                const double* wj = x.data() + static_cast<std::size_t>(j) * stride;
                double dot = 0.0;
                for (int t = 0; t < window_len; ++t)
                    dot += (wi[t] - mean[static_cast<std::size_t>(i)]) *
                           (wj[t] - mean[static_cast<std::size_t>(j)]);
                r = dot / (norm[static_cast<std::size_t>(i)] * norm[static_cast<std::size_t>(j)]);
                r = std::clamp(r, -1.0, 1.0);
            }
            M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = r;
            M[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = r;
        }
    }
    return M;
}

}  // namespace vlfsig::dsp
