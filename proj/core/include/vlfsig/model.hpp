#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vlfsig/msr.hpp"
#include "vlfsig/nn.hpp"

namespace vlfsig {

// Every architectural hyperparameter; the optimizer side lives in TrainConfig.
struct ModelConfig {
    int input_len = 1000;
    int stem_channels = 16;
    std::array<int, 4> stage_channels{32, 64, 128, 256};
    int blocks_per_stage = 2;
    int fpn_channels = 64;
    int d_model = 66;  // nearest even multiple of n_heads to 64
    int n_heads = 6;
    int n_layers = 2;
    int d_ff = 0;  // 0 -> 4*d_model
    int n_classes = 10;
    std::uint64_t seed = 1;
    bool tokens_p2_only = false;

    int effective_d_ff() const { return d_ff > 0 ? d_ff : 4 * d_model; }
    void validate() const;
};

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Common surface for the full model and the ablation baseline.
class Classifier {
public:
    virtual ~Classifier() = default;
    // batch is [B, 1, input_len]; returns logits [B, n_classes].
    virtual Tensor forward(Graph& g, const Tensor& batch) const = 0;
    virtual std::vector<NamedParam>& parameters() = 0;
    virtual const ModelConfig& config() const = 0;
    virtual std::string kind() const = 0;

    std::int64_t parameter_count();
};

// Residual backbone -> FPN -> multi-scale tokens -> encoder stack -> linear head.
class MsrtModel : public Classifier {
public:
    explicit MsrtModel(const ModelConfig& cfg);

    Tensor forward(Graph& g, const Tensor& batch) const override;
    std::vector<NamedParam>& parameters() override { return params_; }
    const ModelConfig& config() const override { return cfg_; }
    std::string kind() const override { return "msrt"; }

    // Single-record path [1, input_len] -> [1, n_classes]; also the test
    // surface for the shape pipeline.
    Tensor forward_record(Graph& g, const Tensor& x) const;
    msr::Pyramid backbone_features(Graph& g, const Tensor& x) const;
    msr::Pyramid fpn_features(Graph& g, const msr::Pyramid& c) const;
    Tensor tokens(Graph& g, const msr::Pyramid& p) const;
    int token_count() const { return msr::token_count(cfg_.input_len, cfg_.tokens_p2_only); }

private:
    ModelConfig cfg_;
    msr::Backbone backbone_;
    msr::FpnMerge fpn_;
    msr::TokenProjector tokens_;
    Tensor pos_encoding_;
    std::vector<nn::EncoderLayer> encoder_;
    nn::LayerNormParams final_norm_;
    nn::LinearLayer head_;
    std::vector<NamedParam> params_;
};

// Ablation baseline: the MSR stage is replaced by a single strided conv
// patchifier (kernel 16, stride 16); encoder and head are identical.
class BaselineTransformer : public Classifier {
public:
    explicit BaselineTransformer(const ModelConfig& cfg);

    Tensor forward(Graph& g, const Tensor& batch) const override;
    std::vector<NamedParam>& parameters() override { return params_; }
    const ModelConfig& config() const override { return cfg_; }
    std::string kind() const override { return "baseline"; }

    Tensor forward_record(Graph& g, const Tensor& x) const;
    int token_count() const { return (cfg_.input_len - kPatchSize) / kPatchSize + 1; }

    static constexpr int kPatchSize = 16;

private:
    ModelConfig cfg_;
    msr::ConvParams patch_;
    Tensor pos_encoding_;
    std::vector<nn::EncoderLayer> encoder_;
    nn::LayerNormParams final_norm_;
    nn::LinearLayer head_;
    std::vector<NamedParam> params_;
};

std::unique_ptr<Classifier> make_classifier(const ModelConfig& cfg, const std::string& kind);

Tensor baseline_transformer_forward(Graph& g, const BaselineTransformer& model,
                                    const Tensor& batch);

struct Prediction {
    std::vector<int> classes;  // argmax, lowest index wins ties
    Tensor probabilities;      // [B, n_classes], rows sum to 1
};
Prediction predict(const Classifier& model, const Tensor& batch);

// Pack records into a [B, 1, len] batch tensor.
Tensor pack_batch(std::span<const std::vector<double>> records);

}  // namespace vlfsig
