#include "vlfsig/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace vlfsig {

void ModelConfig::validate() const {
    if (input_len < 32)
        throw ConfigError("input_len must be at least 32, got " + std::to_string(input_len));
    if (stem_channels < 1 || blocks_per_stage < 1 || fpn_channels < 1 || d_model < 1 ||
        n_heads < 1 || n_layers < 1 || n_classes < 1)
        throw ConfigError("model dimensions must be positive");
    for (int c : stage_channels)
        if (c < 1) throw ConfigError("stage channels must be positive");
    if (d_model % n_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " must be divisible by n_heads " +
                          std::to_string(n_heads));
    if (d_model % 2 != 0)
        throw ConfigError("d_model must be even for the sinusoidal positional encoding");
    if (d_ff < 0) throw ConfigError("d_ff must be non-negative (0 selects 4*d_model)");
}

std::int64_t Classifier::parameter_count() {
    std::int64_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.size();
    return n;
}

namespace {

void reg(std::vector<NamedParam>& out, const std::string& name, const Tensor& t) {
    out.push_back({name, t});
}

void reg_conv(std::vector<NamedParam>& out, const std::string& name, const msr::ConvParams& c) {
    reg(out, name + ".w", c.w);
    reg(out, name + ".b", c.b);
}

void reg_linear(std::vector<NamedParam>& out, const std::string& name, const nn::LinearLayer& l) {
    reg(out, name + ".w", l.weight);
    reg(out, name + ".b", l.bias);
}

void reg_encoder(std::vector<NamedParam>& out, const std::string& prefix,
                 const std::vector<nn::EncoderLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string base = prefix + std::to_string(i);
        const auto& l = layers[i];
        reg(out, base + ".ln1.gamma", l.ln1.gamma);
        reg(out, base + ".ln1.beta", l.ln1.beta);
        reg_linear(out, base + ".mha.q", l.mha.q_proj);
        reg_linear(out, base + ".mha.k", l.mha.k_proj);
        reg_linear(out, base + ".mha.v", l.mha.v_proj);
        reg_linear(out, base + ".mha.o", l.mha.out_proj);
        reg(out, base + ".ln2.gamma", l.ln2.gamma);
        reg(out, base + ".ln2.beta", l.ln2.beta);
        reg_linear(out, base + ".ffn1", l.ffn1);
        reg_linear(out, base + ".ffn2", l.ffn2);
    }
}

Tensor batch_logits(Graph& g, const Tensor& batch, int input_len,
                    const std::function<Tensor(Graph&, const Tensor&)>& record_fn) {
    if (batch.rank() != 3 || batch.dim(1) != 1 || batch.dim(2) != input_len)
        throw ShapeError("batch must be [B,1," + std::to_string(input_len) + "], got " +
                         shape_str(batch.shape()));
    std::vector<Tensor> rows;
    rows.reserve(static_cast<std::size_t>(batch.dim(0)));
    for (int b = 0; b < batch.dim(0); ++b) rows.push_back(record_fn(g, g.slice_plane(batch, b)));
    return rows.size() == 1 ? rows[0] : g.concat_rows(rows);
}

}  // namespace

// --- MsrtModel ----------------------------------------------------------------

MsrtModel::MsrtModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    msr::BackboneConfig bc;
    bc.input_len = cfg_.input_len;
    bc.stem_channels = cfg_.stem_channels;
    bc.stage_channels = cfg_.stage_channels;
    bc.blocks_per_stage = cfg_.blocks_per_stage;
    backbone_ = msr::make_backbone(bc, rng);
    fpn_ = msr::make_fpn(cfg_.stage_channels, cfg_.fpn_channels, rng);
    tokens_ = msr::make_token_projector(cfg_.fpn_channels, cfg_.d_model, cfg_.tokens_p2_only, rng);
    pos_encoding_ = nn::positional_encoding(token_count(), cfg_.d_model);
    for (int i = 0; i < cfg_.n_layers; ++i)
        encoder_.push_back(nn::make_encoder_layer(cfg_.d_model, cfg_.n_heads, cfg_.effective_d_ff(), rng));
    final_norm_ = nn::make_layer_norm(cfg_.d_model);
    head_ = nn::make_linear(cfg_.d_model, cfg_.n_classes, rng);

    reg_conv(params_, "backbone.stem", backbone_.stem);
    for (std::size_t s = 0; s < backbone_.stages.size(); ++s)
        for (std::size_t b = 0; b < backbone_.stages[s].size(); ++b) {
            const std::string base =
                "backbone.s" + std::to_string(s + 2) + ".b" + std::to_string(b);
            reg_conv(params_, base + ".conv1", backbone_.stages[s][b].conv1);
            reg_conv(params_, base + ".conv2", backbone_.stages[s][b].conv2);
            if (backbone_.stages[s][b].skip)
                reg_conv(params_, base + ".skip", *backbone_.stages[s][b].skip);
        }
    for (std::size_t i = 0; i < 4; ++i)
        reg_conv(params_, "fpn.lateral" + std::to_string(i + 2), fpn_.lateral[i]);
    for (std::size_t i = 0; i < 3; ++i)
        reg_conv(params_, "fpn.merge" + std::to_string(i + 2), fpn_.merge[i]);
    const std::size_t n_proj = cfg_.tokens_p2_only ? 1 : 4;
    for (std::size_t i = 0; i < n_proj; ++i)
        reg_linear(params_, "tokens.proj" + std::to_string(i + 2), tokens_.proj[i]);
    reg_encoder(params_, "encoder.l", encoder_);
    reg(params_, "final_norm.gamma", final_norm_.gamma);
    reg(params_, "final_norm.beta", final_norm_.beta);
    reg_linear(params_, "head", head_);
}

msr::Pyramid MsrtModel::backbone_features(Graph& g, const Tensor& x) const {
    return msr::backbone_forward(g, backbone_, x);
}

msr::Pyramid MsrtModel::fpn_features(Graph& g, const msr::Pyramid& c) const {
    return msr::fpn_forward(g, fpn_, c);
}

Tensor MsrtModel::tokens(Graph& g, const msr::Pyramid& p) const {
    return msr::tokens_from_pyramid(g, tokens_, p, pos_encoding_);
}

Tensor MsrtModel::forward_record(Graph& g, const Tensor& x) const {
    Tensor h = tokens(g, fpn_features(g, backbone_features(g, x)));
    for (const auto& layer : encoder_) h = nn::encoder_layer_forward(g, layer, h);
    h = g.layer_norm(h, final_norm_.gamma, final_norm_.beta, nn::kLayerNormEps);
    return nn::linear_forward(g, head_, g.mean_rows(h));
}

Tensor MsrtModel::forward(Graph& g, const Tensor& batch) const {
    return batch_logits(g, batch, cfg_.input_len,
                        [this](Graph& gg, const Tensor& x) { return forward_record(gg, x); });
}

// --- BaselineTransformer --------------------------------------------------------

BaselineTransformer::BaselineTransformer(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.input_len < kPatchSize)
        throw ConfigError("baseline needs input_len >= " + std::to_string(kPatchSize));
    Rng rng(cfg_.seed);
    patch_ = msr::make_conv(1, cfg_.d_model, kPatchSize, kPatchSize, rng);
    patch_.pad_left = 0;
    patch_.pad_right = 0;
    pos_encoding_ = nn::positional_encoding(token_count(), cfg_.d_model);
    for (int i = 0; i < cfg_.n_layers; ++i)
        encoder_.push_back(nn::make_encoder_layer(cfg_.d_model, cfg_.n_heads, cfg_.effective_d_ff(), rng));
    final_norm_ = nn::make_layer_norm(cfg_.d_model);
    head_ = nn::make_linear(cfg_.d_model, cfg_.n_classes, rng);

    reg_conv(params_, "patch", patch_);
    reg_encoder(params_, "encoder.l", encoder_);
    reg(params_, "final_norm.gamma", final_norm_.gamma);
    reg(params_, "final_norm.beta", final_norm_.beta);
    reg_linear(params_, "head", head_);
}

Tensor BaselineTransformer::forward_record(Graph& g, const Tensor& x) const {
    Tensor patches = msr::conv_forward(g, patch_, x);  // [d_model, T]
    Tensor tokens = g.add(g.transpose(patches), pos_encoding_);
    for (const auto& layer : encoder_) tokens = nn::encoder_layer_forward(g, layer, tokens);
    tokens = g.layer_norm(tokens, final_norm_.gamma, final_norm_.beta, nn::kLayerNormEps);
    return nn::linear_forward(g, head_, g.mean_rows(tokens));
}

Tensor BaselineTransformer::forward(Graph& g, const Tensor& batch) const {
    return batch_logits(g, batch, cfg_.input_len,
                        [this](Graph& gg, const Tensor& x) { return forward_record(gg, x); });
}

std::unique_ptr<Classifier> make_classifier(const ModelConfig& cfg, const std::string& kind) {
    if (kind == "msrt") return std::make_unique<MsrtModel>(cfg);
    if (kind == "baseline") return std::make_unique<BaselineTransformer>(cfg);
    throw ConfigError("unknown model kind '" + kind + "' (expected msrt or baseline)");
}

Tensor baseline_transformer_forward(Graph& g, const BaselineTransformer& model,
                                    const Tensor& batch) {
    return model.forward(g, batch);
}

Prediction predict(const Classifier& model, const Tensor& batch) {
    Graph g(false);
    Tensor logits = model.forward(g, batch);
    Tensor probs = g.softmax(logits, -1);
    Prediction out;
    out.probabilities = probs;
    const int B = logits.dim(0), C = logits.dim(1);
    out.classes.resize(static_cast<std::size_t>(B));
    const double* lv = logits.values().data();
    for (int i = 0; i < B; ++i) {
        int best = 0;
        for (int j = 1; j < C; ++j)
            if (lv[i * C + j] > lv[i * C + best]) best = j;
        out.classes[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

Tensor pack_batch(std::span<const std::vector<double>> records) {
    if (records.empty()) throw ShapeError("pack_batch of no records");
    const auto len = records[0].size();
    std::vector<double> data;
    data.reserve(records.size() * len);
    for (const auto& r : records) {
        if (r.size() != len)
            throw ShapeError("pack_batch length mismatch: " + std::to_string(r.size()) + " vs " +
                             std::to_string(len));
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor::from_values({static_cast<int>(records.size()), 1, static_cast<int>(len)},
                               std::move(data));
}

}  // namespace vlfsig
