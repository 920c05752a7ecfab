#pragma once

#include <functional>
#include <iosfwd>
#include <optional>

#include "vlfsig/datagen.hpp"
#include "vlfsig/model.hpp"

namespace vlfsig::train {

struct TrainConfig {
    int batch_size = 10;
    int epochs = 12;
    double learning_rate = 1e-4;
    double beta1 = 0.5;  // the momentum knob
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    // Stop once training accuracy reaches this level; 0 disables.
    double target_accuracy = 0.0;
    void validate() const;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long t = 0;
};

// m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g² ; bias-corrected;
// theta <- theta - lr * m̂ / (sqrt(v̂) + eps). Gradients are read from each
// parameter's accumulator and left untouched.
void adam_step(std::vector<NamedParam>& params, AdamState& state, const TrainConfig& cfg);

// --- metrics -----------------------------------------------------------------

class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes = datagen::kNumClasses)
        : n_(n_classes), counts_(static_cast<std::size_t>(n_classes) * n_classes, 0) {}
    void add(int truth, int predicted);
    long at(int truth, int predicted) const;
    int n_classes() const { return n_; }
    long total() const;
    long row_sum(int truth) const;
    double accuracy() const;

private:
    int n_;
    std::vector<long> counts_;
};

struct ClassScore {
    double precision = 0, recall = 0, f1 = 0;
    bool degenerate = false;  // 0/0 convention hit; value forced to 0
};

struct F1Result {
    std::vector<ClassScore> per_class;
    double macro_f1 = 0;  // unweighted class mean
};
F1Result f1_scores(const ConfusionMatrix& confusion);

// Mean of per-epoch macro-F1 values.
double epoch_average_f1(std::span<const double> per_epoch_f1);

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (FPR, TPR), (0,0) .. (1,1)
    double auc = 0;
};
// Threshold sweep over distinct scores, ties crossing simultaneously; AUC by
// trapezoid, accumulated in integers so it equals the pairwise statistic
// P(s+ > s-) + 0.5 P(s+ = s-) exactly.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth);

struct Histogram {
    std::vector<double> edges;  // n_bins + 1
    std::vector<long> counts;   // n_bins
};
Histogram feature_histogram(const Tensor& t, int n_bins);

// --- training loop -------------------------------------------------------------

struct EpochStats {
    double loss = 0;
    double accuracy = 0;
    double macro_f1 = 0;
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    long steps = 0;
    std::vector<double> per_epoch_f1() const;
};

// Deterministic given cfg.seed: per-epoch seeded shuffle, fixed batch order,
// short final batch allowed. Stats are collected from the training forward
// passes of each epoch.
TrainResult train(Classifier& model, const datagen::Dataset& data, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

// --- evaluation ----------------------------------------------------------------

struct EvalReport {
    ConfusionMatrix confusion{datagen::kNumClasses};
    F1Result f1;
    double accuracy = 0;
    double epoch_avg_f1 = 0;                  // from the training trajectory
    std::vector<EpochStats> trajectory;       // copied from training
    std::vector<RocCurve> roc_per_class;      // one-vs-rest, index = class
    std::vector<double> auc_per_class;
};

EvalReport evaluate(const Classifier& model, const datagen::Dataset& data, int batch_size = 64);

}  // namespace vlfsig::train
