#include "vlfsig/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace vlfsig::train {

void TrainConfig::validate() const {
    if (batch_size < 1 || epochs < 1) throw ConfigError("batch_size and epochs must be positive");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
    if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1)
        throw ConfigError("beta1 and beta2 must be in (0,1)");
    if (adam_eps <= 0) throw ConfigError("adam_eps must be positive");
    if (target_accuracy < 0 || target_accuracy > 1)
        throw ConfigError("target_accuracy must be in [0,1]");
}

void adam_step(std::vector<NamedParam>& params, AdamState& state, const TrainConfig& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(static_cast<std::size_t>(params[i].tensor.size()), 0.0);
            state.v[i].assign(static_cast<std::size_t>(params[i].tensor.size()), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw ShapeError("adam state does not match parameter list");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].tensor.values_mut();
        auto g = params[i].tensor.grad_mut();
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != theta.size())
            throw ShapeError("adam moment shape mismatch for " + params[i].name);
        const auto n = static_cast<std::int64_t>(theta.size());
#pragma omp parallel for schedule(static) if (n > 65536)
        for (std::int64_t j = 0; j < n; ++j) {
            m[static_cast<std::size_t>(j)] =
                cfg.beta1 * m[static_cast<std::size_t>(j)] + (1.0 - cfg.beta1) * g[j];
            v[static_cast<std::size_t>(j)] =
                cfg.beta2 * v[static_cast<std::size_t>(j)] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[static_cast<std::size_t>(j)] / bc1;
            const double vhat = v[static_cast<std::size_t>(j)] / bc2;
            theta[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

// --- metrics -----------------------------------------------------------------

void ConfusionMatrix::add(int truth, int predicted) {
    if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_)
        throw ConfigError("confusion index out of range");
    ++counts_[static_cast<std::size_t>(truth) * n_ + predicted];
}

long ConfusionMatrix::at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth) * n_ + predicted];
}

long ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), 0L);
}

long ConfusionMatrix::row_sum(int truth) const {
    long s = 0;
    for (int j = 0; j < n_; ++j) s += at(truth, j);
    return s;
}

double ConfusionMatrix::accuracy() const {
    const long tot = total();
    if (tot == 0) return 0.0;
    long diag = 0;
    for (int i = 0; i < n_; ++i) diag += at(i, i);
    return static_cast<double>(diag) / static_cast<double>(tot);
}

F1Result f1_scores(const ConfusionMatrix& confusion) {
    const int n = confusion.n_classes();
    F1Result out;
    out.per_class.resize(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
        long tp = confusion.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < n; ++o) {
            if (o == c) continue;
            fp += confusion.at(o, c);
            fn += confusion.at(c, o);
        }
        ClassScore& s = out.per_class[static_cast<std::size_t>(c)];
        if (tp + fp == 0) {
            s.precision = 0;
            s.degenerate = true;
        } else {
            s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        }
        if (tp + fn == 0) {
            s.recall = 0;
            s.degenerate = true;
        } else {
            s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        if (s.precision + s.recall == 0) {
            s.f1 = 0;
            if (tp == 0 && fp == 0 && fn == 0) s.degenerate = true;
        } else {
            s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
        }
        sum += s.f1;
    }
    out.macro_f1 = sum / n;
    return out;
}

double epoch_average_f1(std::span<const double> per_epoch_f1) {
    if (per_epoch_f1.empty()) throw ConfigError("epoch_average_f1 of an empty trajectory");
    double s = 0.0;
    for (double v : per_epoch_f1) s += v;
    return s / static_cast<double>(per_epoch_f1.size());
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size())
        throw ShapeError("roc_auc: score/truth lengths differ");
    long P = 0, N = 0;
    for (int t : truth) (t != 0 ? P : N) += 1;
    if (P == 0 || N == 0)
        throw ConfigError("roc_auc requires at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve out;
    out.points.emplace_back(0.0, 0.0);
    long tp = 0, fp = 0;
    long auc_num = 0;  // 2 * P * N * AUC, exact in integers
    std::size_t i = 0;
    while (i < order.size()) {
        // All records tied at this score cross the threshold together.
        const double s = scores[order[i]];
        long dtp = 0, dfp = 0;
        while (i < order.size() && scores[order[i]] == s) {
            (truth[order[i]] != 0 ? dtp : dfp) += 1;
            ++i;
        }
        auc_num += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        out.points.emplace_back(static_cast<double>(fp) / static_cast<double>(N),
                                static_cast<double>(tp) / static_cast<double>(P));
    }
    out.auc = static_cast<double>(auc_num) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
    return out;
}

Histogram feature_histogram(const Tensor& t, int n_bins) {
    if (n_bins < 1) throw ConfigError("feature_histogram requires n_bins >= 1");
    const auto vals = t.values();
    if (vals.empty()) throw ShapeError("feature_histogram of an empty tensor");
    double lo = vals[0], hi = vals[0];
    for (double v : vals) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(n_bins) + 1);
    h.counts.assign(static_cast<std::size_t>(n_bins), 0);
    const double width = (hi - lo) / n_bins;
    for (int b = 0; b <= n_bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + width * b;
    h.edges.back() = hi;
    for (double v : vals) {
        int b = width > 0 ? static_cast<int>((v - lo) / width) : 0;
        b = std::clamp(b, 0, n_bins - 1);
        ++h.counts[static_cast<std::size_t>(b)];
    }
    return h;
}

// --- training loop -------------------------------------------------------------

std::vector<double> TrainResult::per_epoch_f1() const {
    std::vector<double> out;
    out.reserve(epochs.size());
    for (const auto& e : epochs) out.push_back(e.macro_f1);
    return out;
}

TrainResult train(Classifier& model, const datagen::Dataset& data, const TrainConfig& cfg,
                  std::ostream* log) {
    cfg.validate();
    if (data.empty()) throw ConfigError("training dataset is empty");
    const int n_classes = model.config().n_classes;
    for (const auto& rec : data)
        if (rec.label < 0 || rec.label >= n_classes)
            throw ConfigError("dataset label " + std::to_string(rec.label) + " out of range [0," +
                              std::to_string(n_classes) + ")");

    auto& params = model.parameters();
    AdamState adam;
    Rng shuffle_rng(hash_seed(cfg.seed, 0x7241EULL));
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        ConfusionMatrix confusion(n_classes);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto bsz = static_cast<double>(stop - start);
            for (auto& p : params) p.tensor.zero_grad();
            for (std::size_t r = start; r < stop; ++r) {
                const auto& rec = data[static_cast<std::size_t>(order[r])];
                // Per-record tape: the mean-over-batch loss splits into
                // 1/B-scaled per-record terms, accumulated in record order.
                Graph g;
                Tensor logits = model.forward(
                    g, Tensor::from_values({1, 1, static_cast<int>(rec.samples.size())},
                                           rec.samples));
                const int label = rec.label;
                Tensor loss = g.scale(g.cross_entropy(logits, std::span<const int>(&label, 1)),
                                      1.0 / bsz);
                g.backward(loss);
                loss_sum += loss.item() * bsz;
                const double* lv = logits.values().data();
                int arg = 0;
                for (int j = 1; j < n_classes; ++j)
                    if (lv[j] > lv[arg]) arg = j;
                confusion.add(label, arg);
            }
            adam_step(params, adam, cfg);
            result.steps += 1;
        }
        EpochStats stats;
        stats.loss = loss_sum / static_cast<double>(data.size());
        stats.accuracy = confusion.accuracy();
        stats.macro_f1 = f1_scores(confusion).macro_f1;
        result.epochs.push_back(stats);
        if (log)
            (*log) << "epoch " << (epoch + 1) << "/" << cfg.epochs << "  loss " << stats.loss
                   << "  acc " << stats.accuracy << "  macro_f1 " << stats.macro_f1 << "\n";
        if (cfg.target_accuracy > 0 && stats.accuracy >= cfg.target_accuracy) break;
    }
    return result;
}

// --- evaluation ----------------------------------------------------------------

EvalReport evaluate(const Classifier& model, const datagen::Dataset& data, int batch_size) {
    if (data.empty()) throw ConfigError("evaluation dataset is empty");
    const int n_classes = model.config().n_classes;
    EvalReport report;
    report.confusion = ConfusionMatrix(n_classes);
    std::vector<std::vector<double>> scores(static_cast<std::size_t>(n_classes));
    std::vector<int> labels;
    labels.reserve(data.size());

    for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<std::vector<double>> chunk;
        chunk.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) chunk.push_back(data[i].samples);
        const Prediction pred = predict(model, pack_batch(chunk));
        const double* pv = pred.probabilities.values().data();
        for (std::size_t i = start; i < stop; ++i) {
            const int truth = data[i].label;
            report.confusion.add(truth, pred.classes[i - start]);
            labels.push_back(truth);
            for (int c = 0; c < n_classes; ++c)
                scores[static_cast<std::size_t>(c)].push_back(pv[(i - start) * n_classes + c]);
        }
    }

    report.f1 = f1_scores(report.confusion);
    report.accuracy = report.confusion.accuracy();
    report.roc_per_class.resize(static_cast<std::size_t>(n_classes));
    report.auc_per_class.assign(static_cast<std::size_t>(n_classes), 0.0);
    for (int c = 0; c < n_classes; ++c) {
        std::vector<int> binary(labels.size());
        long pos = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            binary[i] = labels[i] == c ? 1 : 0;
            pos += binary[i];
        }
        if (pos == 0 || pos == static_cast<long>(labels.size())) continue;  // one-class slice
        report.roc_per_class[static_cast<std::size_t>(c)] =
            roc_auc(scores[static_cast<std::size_t>(c)], binary);
        report.auc_per_class[static_cast<std::size_t>(c)] =
            report.roc_per_class[static_cast<std::size_t>(c)].auc;
    }
    return report;
}

}  // namespace vlfsig::train
