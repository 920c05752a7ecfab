#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vlfsig/nn.hpp"
#include "vlfsig/tensor.hpp"

namespace vlfsig::msr {

// One convolution with its padding convention baked in. Strided downsampling
// convs pad so the output length is exactly floor(L/stride) at every stage,
// which keeps the 1000 -> 250/125/62/31 pyramid exact also at odd lengths.
struct ConvParams {
    Tensor w;  // [Cout, Cin, K]
    Tensor b;  // [Cout]
    int stride = 1;
    int pad_left = 0;
    int pad_right = 0;
};

ConvParams make_conv(int cin, int cout, int ksz, int stride, Rng& rng);
Tensor conv_forward(Graph& g, const ConvParams& c, const Tensor& x);

// Two kernel-3 convolutions with a skip connection; the skip is a 1x1
// stride-matched projection whenever channels or length change.
struct ResidualBlock {
    ConvParams conv1, conv2;
    std::optional<ConvParams> skip;
};
ResidualBlock make_residual_block(int cin, int cout, int stride, Rng& rng);
Tensor residual_block_forward(Graph& g, const ResidualBlock& blk, const Tensor& x);

struct BackboneConfig {
    int input_len = 1000;
    int stem_channels = 16;
    std::array<int, 4> stage_channels{32, 64, 128, 256};
    int blocks_per_stage = 2;
};

struct Backbone {
    BackboneConfig cfg;
    ConvParams stem;  // kernel 7, stride 2
    std::vector<std::vector<ResidualBlock>> stages;
};
Backbone make_backbone(const BackboneConfig& cfg, Rng& rng);

using Pyramid = std::array<Tensor, 4>;  // C2..C5 (or P2..P5)

// x is [1, input_len]; returns C2..C5.
Pyramid backbone_forward(Graph& g, const Backbone& bb, const Tensor& x);

// Expected per-level lengths for a given input length.
std::array<int, 4> pyramid_lengths(int input_len);

// Top-down merge: P5 = lateral5(C5); Pi = merge_i(upsample(P_{i+1}) + lateral_i(C_i)).
struct FpnMerge {
    int fpn_channels = 64;
    std::array<ConvParams, 4> lateral;  // 1x1 per level, C2..C5 order
    std::array<ConvParams, 3> merge;    // kernel 3, levels P2..P4
};
FpnMerge make_fpn(const std::array<int, 4>& c_channels, int fpn_channels, Rng& rng);
Pyramid fpn_forward(Graph& g, const FpnMerge& fpn, const Pyramid& c);

// Per-level 1x1 projection to d_model, transpose to [len, d_model], concat
// P2..P5 along the token axis, add the positional encoding.
struct TokenProjector {
    int d_model = 64;
    bool p2_only = false;
    std::array<nn::LinearLayer, 4> proj;
};
TokenProjector make_token_projector(int fpn_channels, int d_model, bool p2_only, Rng& rng);
Tensor tokens_from_pyramid(Graph& g, const TokenProjector& tp, const Pyramid& p,
                           const Tensor& pos_encoding);
int token_count(int input_len, bool p2_only);

}  // namespace vlfsig::msr
