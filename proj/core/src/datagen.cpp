#include "vlfsig/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vlfsig/errors.hpp"

namespace vlfsig::datagen {

namespace {

constexpr double kPi = 3.14159265358979323846;

double draw(Rng& rng, Range r) { return rng.uniform(r.lo, r.hi); }

// e^(-t/tau_d) - e^(-t/tau_r), peak-normalized, added at `onset` with sign*amp.
void add_double_exp(std::vector<double>& s, int onset, double sign_amp, double tau_r,
                    double tau_d) {
    const double t_peak = std::log(tau_d / tau_r) * tau_r * tau_d / (tau_d - tau_r);
    const double peak = std::exp(-t_peak / tau_d) - std::exp(-t_peak / tau_r);
    const int n = static_cast<int>(s.size());
    for (int i = onset; i < n; ++i) {
        const double t = i - onset;
        s[static_cast<std::size_t>(i)] +=
            sign_amp * (std::exp(-t / tau_d) - std::exp(-t / tau_r)) / peak;
    }
}

// One bipolar pulselet: positive half-sine lead of width w1, negative trail of
// width w2 scaled by trail_frac. `sign` flips the leading lobe.
void add_bipolar(std::vector<double>& s, int onset, double sign_amp, double w1, double w2,
                 double trail_frac) {
    const int n = static_cast<int>(s.size());
    for (int i = onset; i < n; ++i) {
        const double t = i - onset;
        double v = 0.0;
        if (t < w1)
            v = std::sin(kPi * t / w1);
        else if (t < w1 + w2)
            v = -trail_frac * std::sin(kPi * (t - w1) / w2);
        else
            break;
        s[static_cast<std::size_t>(i)] += sign_amp * v;
    }
}

void add_ring(std::vector<double>& s, int onset, double amp, double freq_khz, double decay_us) {
    const int n = static_cast<int>(s.size());
    const double w = 2.0 * kPi * freq_khz * 1e-3;  // rad per microsecond
    for (int i = onset; i < n; ++i) {
        const double t = i - onset;
        s[static_cast<std::size_t>(i)] += amp * std::sin(w * t) * std::exp(-t / decay_us);
    }
}

void gaussian_smooth(std::vector<double>& s, double sigma) {
    const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
    double sum = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
        kernel[static_cast<std::size_t>(i + half)] = v;
        sum += v;
    }
    for (auto& v : kernel) v /= sum;
    std::vector<double> out(s.size(), 0.0);
    const int n = static_cast<int>(s.size());
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = -half; j <= half; ++j) {
            const int k = i + j;
            if (k >= 0 && k < n) acc += s[static_cast<std::size_t>(k)] * kernel[static_cast<std::size_t>(j + half)];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    s = std::move(out);
}

void normalize_peak(std::vector<double>& s) {
    double peak = 0.0;
    for (double v : s) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (auto& v : s) v /= peak;
}

}  // namespace

SignalRecord gen_waveform(int class_idx, std::uint64_t seed, int input_len) {
    if (class_idx < 0 || class_idx >= kNumClasses)
        throw ConfigError("class index " + std::to_string(class_idx) + " out of range [0,10)");
    if (input_len < 1) throw ConfigError("input_len must be positive");

    Rng rng(hash_seed(seed, static_cast<std::uint64_t>(class_idx)));
    std::vector<double> s(static_cast<std::size_t>(input_len), 0.0);
    const int onset = ClassSpec::kNominalOnset +
                      static_cast<int>(rng.uniform_int(-ClassSpec::kOnsetJitter,
                                                       ClassSpec::kOnsetJitter));
    const double amp = draw(rng, ClassSpec::kPeakAmplitude);

    switch (class_idx) {
        case 0:
        case 1: {  // ∓CG: double-exponential with opposite-polarity overshoot
            const double sign = class_idx == 0 ? -1.0 : 1.0;
            const double tau_r = draw(rng, ClassSpec::kCgRiseUs);
            const double tau_d = draw(rng, ClassSpec::kCgDecayUs);
            const double over = draw(rng, ClassSpec::kCgOvershootFrac);
            add_double_exp(s, onset, sign, tau_r, tau_d);
            add_double_exp(s, onset, -sign * over, 3.0 * tau_r, 2.5 * tau_d);
            break;
        }
        case 2:
        case 3: {  // ∓PBP: growing bipolar pulselets
            const double sign = class_idx == 2 ? -1.0 : 1.0;
            const int n_pulses = static_cast<int>(
                rng.uniform_int(ClassSpec::kPbpMinPulses, ClassSpec::kPbpMaxPulses));
            int pos = onset;
            for (int p = 0; p < n_pulses && pos < input_len; ++p) {
                const double w1 = draw(rng, ClassSpec::kPbpLeadWidthUs);
                const double trail = draw(rng, ClassSpec::kPbpTrailFrac);
                const double rel = static_cast<double>(p + 1) / n_pulses;
                add_bipolar(s, pos, sign * rel, w1, 1.4 * w1, trail);
                pos += static_cast<int>(draw(rng, ClassSpec::kPbpGapUs));
            }
            break;
        }
        case 4:
        case 5: {  // ∓NBE: single narrow bipolar pulse
            const double sign = class_idx == 4 ? -1.0 : 1.0;
            const double width = draw(rng, ClassSpec::kNbeFullWidthUs);
            const double w1 = width * draw(rng, ClassSpec::kNbeLeadShare);
            add_bipolar(s, onset, sign, w1, width - w1, draw(rng, ClassSpec::kNbeTrailFrac));
            break;
        }
        case 6: {  // NBE with ringing tail
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const double width = draw(rng, ClassSpec::kNbeFullWidthUs);
            const double w1 = width * draw(rng, ClassSpec::kNbeLeadShare);
            add_bipolar(s, onset, sign, w1, width - w1, draw(rng, ClassSpec::kNbeTrailFrac));
            add_ring(s, onset + static_cast<int>(width), sign * draw(rng, ClassSpec::kRingAmpFrac),
                     draw(rng, ClassSpec::kRingFreqKhz), draw(rng, ClassSpec::kRingDecayUs));
            break;
        }
        case 7: {  // MP: several CG-like pulses
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const int n_pulses = static_cast<int>(
                rng.uniform_int(ClassSpec::kMpMinPulses, ClassSpec::kMpMaxPulses));
            int pos = onset;
            for (int p = 0; p < n_pulses && pos < input_len - 30; ++p) {
                const double rel = p == 0 ? 1.0 : draw(rng, ClassSpec::kMpRelAmplitude);
                add_double_exp(s, pos, sign * rel, draw(rng, ClassSpec::kCgRiseUs),
                               draw(rng, ClassSpec::kMpDecayUs));
                pos += static_cast<int>(draw(rng, ClassSpec::kMpGapUs));
            }
            break;
        }
        case 8: {  // CG-IR: CG plus delayed smoothed replica
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const double tau_r = draw(rng, ClassSpec::kCgRiseUs);
            const double tau_d = draw(rng, ClassSpec::kCgDecayUs);
            const int delay = static_cast<int>(draw(rng, ClassSpec::kIrDelayUs));
            const double scale = draw(rng, ClassSpec::kIrScale);
            add_double_exp(s, onset, sign, tau_r, tau_d);
            std::vector<double> replica(s.size(), 0.0);
            add_double_exp(replica, onset + delay, sign * scale, tau_r, tau_d);
            gaussian_smooth(replica, draw(rng, ClassSpec::kIrSmoothSigmaUs));
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += replica[i];
            break;
        }
        case 9: {  // SW: chirped oscillation, slow attack
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            const double f0 = draw(rng, ClassSpec::kSwBaseFreqKhz) * 1e-3;  // cycles/us
            const double chirp = draw(rng, ClassSpec::kSwChirpFracPerRecord) * f0 /
                                 static_cast<double>(input_len);
            const double tau_a = draw(rng, ClassSpec::kSwAttackUs);
            const double tau_d = draw(rng, ClassSpec::kSwDecayUs);
            for (int i = onset; i < input_len; ++i) {
                const double t = i - onset;
                const double env = (1.0 - std::exp(-t / tau_a)) * std::exp(-t / tau_d);
                s[static_cast<std::size_t>(i)] +=
                    sign * env * std::sin(2.0 * kPi * (f0 * t + 0.5 * chirp * t * t));
            }
            break;
        }
        default:
            break;
    }

    normalize_peak(s);
    const double sigma = draw(rng, ClassSpec::kNoiseSigmaFrac) * amp;
    for (auto& v : s) v = v * amp + sigma * rng.normal();

    SignalRecord rec;
    rec.samples = std::move(s);
    rec.label = class_idx;
    rec.meta = {onset, amp, sigma, seed};
    return rec;
}

Dataset gen_dataset(int per_class, std::uint64_t seed, int input_len) {
    if (per_class < 1) throw ConfigError("per_class must be >= 1");
    Dataset out;
    out.reserve(static_cast<std::size_t>(per_class) * kNumClasses);
    for (int c = 0; c < kNumClasses; ++c)
        for (int i = 0; i < per_class; ++i)
            out.push_back(gen_waveform(
                c, hash_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)),
                input_len));
    Rng shuffle_rng(hash_seed(seed, 0x0ddba11ULL));
    shuffle_rng.shuffle(out);
    return out;
}

std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold_split requires k >= 2");
    if (k > n) throw ConfigError("kfold_split requires k <= n, got k=" + std::to_string(k) +
                                 ", n=" + std::to_string(n));
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(hash_seed(seed, 0xf01dULL));
    rng.shuffle(idx);
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    const int base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
        const int sz = base + (f < extra ? 1 : 0);
        folds[static_cast<std::size_t>(f)].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                                                  idx.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += static_cast<std::size_t>(sz);
    }
    return folds;
}

bool threshold_trigger(std::span<const double> x, double threshold) {
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    return peak >= threshold;
}

}  // namespace vlfsig::datagen
