#pragma once

#include "vlfsig/rng.hpp"
#include "vlfsig/tensor.hpp"

namespace vlfsig::nn {

// y = x·Wᵀ + b, weight is [Dout, Din].
struct LinearLayer {
    Tensor weight;
    Tensor bias;
    int in_features() const { return weight.dim(1); }
    int out_features() const { return weight.dim(0); }
};

LinearLayer make_linear(int din, int dout, Rng& rng);
Tensor linear_forward(Graph& g, const LinearLayer& layer, const Tensor& x);

struct LayerNormParams {
    Tensor gamma;  // ones at init
    Tensor beta;   // zeros at init
};
LayerNormParams make_layer_norm(int width);

inline constexpr double kLayerNormEps = 1e-5;

struct MultiHeadAttention {
    int n_heads = 1;
    int d_model = 0;
    LinearLayer q_proj, k_proj, v_proj, out_proj;
    int d_head() const { return d_model / n_heads; }
};
MultiHeadAttention make_mha(int d_model, int n_heads, Rng& rng);

// softmax(q·kᵀ/√d)·v over the full sequence, no masking.
Tensor attention(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v);
Tensor mha_forward(Graph& g, const MultiHeadAttention& mha, const Tensor& x);

// Pre-norm encoder layer: y = x + MHA(LN(x)); z = y + FFN(LN(y)).
struct EncoderLayer {
    MultiHeadAttention mha;
    LinearLayer ffn1, ffn2;
    LayerNormParams ln1, ln2;
};
EncoderLayer make_encoder_layer(int d_model, int n_heads, int d_ff, Rng& rng);
Tensor encoder_layer_forward(Graph& g, const EncoderLayer& layer, const Tensor& x);

// Fixed sinusoidal table [T, d_model]: sin on even columns, cos on odd,
// wavelengths geometric from 2π to 10000·2π. d_model must be even.
Tensor positional_encoding(int seq_len, int d_model);

// Arithmetic mean over tokens, [T,D] -> [D].
Tensor global_mean_pool(Graph& g, const Tensor& x);

}  // namespace vlfsig::nn
