#include "vlfsig/nn.hpp"

#include <cmath>
#include <vector>

namespace vlfsig::nn {

namespace {

// Uniform in ±sqrt(6/(fan_in+fan_out)).
std::vector<double> glorot_uniform(std::int64_t n, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
}

}  // namespace

LinearLayer make_linear(int din, int dout, Rng& rng) {
    if (din < 1 || dout < 1) throw ConfigError("linear layer dimensions must be positive");
    LinearLayer l;
    l.weight = Tensor::from_values({dout, din},
                                   glorot_uniform(static_cast<std::int64_t>(dout) * din, din, dout, rng),
                                   true);
    l.bias = Tensor::zeros({dout}, true);
    return l;
}

Tensor linear_forward(Graph& g, const LinearLayer& layer, const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != layer.in_features())
        throw ShapeError("linear_forward: input " + shape_str(x.shape()) +
                         " does not match weight " + shape_str(layer.weight.shape()));
    return g.add_bias(g.matmul_ex(x, layer.weight, false, true), layer.bias);
}

LayerNormParams make_layer_norm(int width) {
    LayerNormParams p;
    p.gamma = Tensor::full({width}, 1.0, true);
    p.beta = Tensor::zeros({width}, true);
    return p;
}

MultiHeadAttention make_mha(int d_model, int n_heads, Rng& rng) {
    if (n_heads < 1 || d_model < 1 || d_model % n_heads != 0)
        throw ConfigError("d_model " + std::to_string(d_model) + " must be divisible by n_heads " +
                          std::to_string(n_heads));
    MultiHeadAttention mha;
    mha.n_heads = n_heads;
    mha.d_model = d_model;
    mha.q_proj = make_linear(d_model, d_model, rng);
    mha.k_proj = make_linear(d_model, d_model, rng);
    mha.v_proj = make_linear(d_model, d_model, rng);
    mha.out_proj = make_linear(d_model, d_model, rng);
    return mha;
}

Tensor attention(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.shape() != k.shape() || q.shape() != v.shape())
        throw ShapeError("attention requires matching q/k/v shapes, got q " +
                         shape_str(q.shape()) + ", k " + shape_str(k.shape()) + ", v " +
                         shape_str(v.shape()));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
    Tensor scores = g.scale(g.matmul_ex(q, k, false, true), inv_sqrt_d);
    return g.matmul(g.softmax(scores, -1), v);
}

Tensor mha_forward(Graph& g, const MultiHeadAttention& mha, const Tensor& x) {
    if (x.rank() != 2 || x.dim(1) != mha.d_model)
        throw ShapeError("mha_forward: input " + shape_str(x.shape()) + " does not match d_model " +
                         std::to_string(mha.d_model));
    const int dh = mha.d_head();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    Tensor q = linear_forward(g, mha.q_proj, x);
    Tensor k = linear_forward(g, mha.k_proj, x);
    Tensor v = linear_forward(g, mha.v_proj, x);
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(mha.n_heads));
    for (int h = 0; h < mha.n_heads; ++h) {
        const int c0 = h * dh, c1 = (h + 1) * dh;
        Tensor weights = g.attend_scaled(g.slice_cols(q, c0, c1), g.slice_cols(k, c0, c1),
                                         inv_sqrt_dh);
        heads.push_back(g.matmul(weights, g.slice_cols(v, c0, c1)));
    }
    return linear_forward(g, mha.out_proj, g.concat_cols(heads));
}

EncoderLayer make_encoder_layer(int d_model, int n_heads, int d_ff, Rng& rng) {
    EncoderLayer layer;
    layer.mha = make_mha(d_model, n_heads, rng);
    layer.ffn1 = make_linear(d_model, d_ff, rng);
    layer.ffn2 = make_linear(d_ff, d_model, rng);
    layer.ln1 = make_layer_norm(d_model);
    layer.ln2 = make_layer_norm(d_model);
    return layer;
}

Tensor encoder_layer_forward(Graph& g, const EncoderLayer& layer, const Tensor& x) {
    Tensor y = g.add(x, mha_forward(g, layer.mha,
                                    g.layer_norm(x, layer.ln1.gamma, layer.ln1.beta, kLayerNormEps)));
    Tensor h = g.layer_norm(y, layer.ln2.gamma, layer.ln2.beta, kLayerNormEps);
    Tensor ffn = linear_forward(g, layer.ffn2, g.relu(linear_forward(g, layer.ffn1, h)));
    return g.add(y, ffn);
}

Tensor positional_encoding(int seq_len, int d_model) {
    if (d_model % 2 != 0)
        throw ConfigError("positional encoding requires even d_model, got " +
                          std::to_string(d_model));
    if (seq_len < 1) throw ConfigError("positional encoding requires seq_len >= 1");
    std::vector<double> v(static_cast<std::size_t>(seq_len) * d_model);
    for (int pos = 0; pos < seq_len; ++pos) {
        for (int i = 0; i < d_model / 2; ++i) {
            const double omega = std::exp(-std::log(10000.0) * (2.0 * i / d_model));
            v[static_cast<std::size_t>(pos) * d_model + 2 * i] = std::sin(pos * omega);
            v[static_cast<std::size_t>(pos) * d_model + 2 * i + 1] = std::cos(pos * omega);
        }
    }
    return Tensor::from_values({seq_len, d_model}, std::move(v));
}

Tensor global_mean_pool(Graph& g, const Tensor& x) {
    if (x.rank() != 2 || x.dim(0) < 1)
        throw ShapeError("global_mean_pool requires a non-empty [T,D] input, got " +
                         shape_str(x.shape()));
    return g.reshape(g.mean_rows(x), {x.dim(1)});
}

}  // namespace vlfsig::nn
