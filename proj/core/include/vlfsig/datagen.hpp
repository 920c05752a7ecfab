#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vlfsig/rng.hpp"

namespace vlfsig::datagen {

// Fixed label order; serialized files use these indices.
inline constexpr std::array<const char*, 10> kClassNames = {
    "-CG", "+CG", "-PBP", "+PBP", "-NBE", "+NBE", "NBE", "MP", "CG-IR", "SW"};
inline constexpr int kNumClasses = 10;

struct RecordMeta {
    int onset = 0;          // main-pulse onset sample
    double amplitude = 0;   // peak amplitude before noise
    double noise_sigma = 0;
    std::uint64_t seed = 0;
};

struct SignalRecord {
    std::vector<double> samples;  // one sample per microsecond
    int label = 0;
    RecordMeta meta;
};

using Dataset = std::vector<SignalRecord>;

struct Range {
    double lo, hi;
};

// Parameter ranges per waveform family. One source of truth for generator,
// tests, and docs. Units are microseconds (== samples at 1 MSPS) unless noted.
struct ClassSpec {
    // trigger geometry
    static constexpr int kNominalOnset = 100;
    static constexpr int kOnsetJitter = 50;
    static constexpr Range kPeakAmplitude{0.5, 2.0};
    static constexpr Range kNoiseSigmaFrac{0.01, 0.05};  // of peak amplitude

    // ±CG: double-exponential return stroke with opposite-polarity overshoot
    static constexpr Range kCgRiseUs{1.0, 4.0};
    static constexpr Range kCgDecayUs{20.0, 60.0};
    static constexpr Range kCgOvershootFrac{0.10, 0.25};

    // ±PBP: growing train of bipolar pulselets
    static constexpr int kPbpMinPulses = 3;
    static constexpr int kPbpMaxPulses = 8;
    static constexpr Range kPbpGapUs{20.0, 80.0};
    static constexpr Range kPbpLeadWidthUs{4.0, 10.0};
    static constexpr Range kPbpTrailFrac{0.5, 0.7};

    // ±NBE: single narrow bipolar pulse
    static constexpr Range kNbeFullWidthUs{10.0, 30.0};
    static constexpr Range kNbeLeadShare{0.45, 0.55};
    static constexpr Range kNbeTrailFrac{0.55, 0.75};

    // NBE (class 6): narrow bipolar with a ringing tail
    static constexpr Range kRingFreqKhz{40.0, 80.0};
    static constexpr Range kRingDecayUs{15.0, 40.0};
    static constexpr Range kRingAmpFrac{0.4, 0.7};

    // MP: several CG-like pulses in one window
    static constexpr int kMpMinPulses = 2;
    static constexpr int kMpMaxPulses = 5;
    static constexpr Range kMpGapUs{30.0, 120.0};
    static constexpr Range kMpDecayUs{10.0, 30.0};
    static constexpr Range kMpRelAmplitude{0.45, 1.0};

    // CG-IR: CG plus a delayed, attenuated, smoothed replica
    static constexpr Range kIrDelayUs{100.0, 300.0};
    static constexpr Range kIrScale{0.3, 0.7};
    static constexpr Range kIrSmoothSigmaUs{3.0, 6.0};

    // SW: chirped decaying oscillation without a sharp leading edge
    static constexpr Range kSwBaseFreqKhz{15.0, 40.0};
    static constexpr Range kSwChirpFracPerRecord{-0.3, 0.3};
    static constexpr Range kSwAttackUs{20.0, 50.0};
    static constexpr Range kSwDecayUs{80.0, 200.0};
};

// Deterministic given (class_idx, seed). Throws ConfigError on a bad class.
SignalRecord gen_waveform(int class_idx, std::uint64_t seed, int input_len = 1000);

// per_class records per label, seeds derived from (seed, class, index),
// deterministically shuffled.
Dataset gen_dataset(int per_class, std::uint64_t seed, int input_len = 1000);

// Deterministic shuffled partition of [0,n) into k folds whose sizes differ
// by at most one.
std::vector<std::vector<int>> kfold_split(int n, int k, std::uint64_t seed);

// true iff max|x| >= threshold (inclusive).
bool threshold_trigger(std::span<const double> x, double threshold);

}  // namespace vlfsig::datagen
