#pragma once

#include <span>
#include <vector>

namespace vlfsig::dsp {

struct FilterSpec {
    double sample_rate_hz = 131072.0;
    double lowpass_cutoff_hz = 30000.0;
    int lowpass_order = 4;  // even; realized as order/2 biquads
    double notch_base_hz = 50.0;
    int notch_harmonics = 20;  // notches at base*k, k = 1..notch_harmonics
    double notch_q = 30.0;
    void validate() const;
};

// One second-order section, normalized (a0 == 1).
struct Biquad {
    double b0 = 1, b1 = 0, b2 = 0;
    double a1 = 0, a2 = 0;
    bool stable() const;  // poles strictly inside the unit circle
    double max_pole_radius() const;
};

class BiquadCascade {
public:
    static BiquadCascade butterworth_lowpass(double cutoff_hz, double sample_rate_hz, int order);
    static Biquad notch(double freq_hz, double sample_rate_hz, double q);

    void append(const Biquad& s) { sections_.push_back(s); }
    const std::vector<Biquad>& sections() const { return sections_; }
    bool stable() const;

    // Samples for the slowest pole envelope to fall below tol.
    long settling_samples(double tol = 1e-9) const;

    // Single causal pass from zero state.
    std::vector<double> filter(std::span<const double> x) const;

    // Forward-backward (zero-phase) pass with folded-reflection padding of
    // 3x the settling length on each side.
    std::vector<double> filtfilt(std::span<const double> x) const;

private:
    std::vector<Biquad> sections_;
};

// x minus its arithmetic mean.
std::vector<double> remove_dc(std::span<const double> x);

// Order-4 Butterworth, zero-phase.
std::vector<double> lowpass(std::span<const double> x, const FilterSpec& spec);

// Cascade of notches at base*k for k = 1..notch_harmonics, zero-phase.
std::vector<double> notch_comb(std::span<const double> x, const FilterSpec& spec);

// remove_dc -> lowpass -> notch_comb.
std::vector<double> preprocess(std::span<const double> x, const FilterSpec& spec);

// M[i,j] = Pearson correlation of the windows at offsets i*stride and
// j*stride. Zero-variance windows correlate 1 with themselves, 0 with others.
std::vector<std::vector<double>> correlation_heatmap(std::span<const double> x, int window_len,
                                                     int stride);

}  // namespace vlfsig::dsp
