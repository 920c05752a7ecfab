#include "vlfsig/msr.hpp"

#include <cmath>

namespace vlfsig::msr {

namespace {

std::vector<double> conv_init(int cin, int cout, int ksz, Rng& rng) {
    const double bound = std::sqrt(6.0 / (cin * ksz + cout * ksz));
    std::vector<double> v(static_cast<std::size_t>(cout) * cin * ksz);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return v;
}

}  // namespace

ConvParams make_conv(int cin, int cout, int ksz, int stride, Rng& rng) {
    ConvParams c;
    c.w = Tensor::from_values({cout, cin, ksz}, conv_init(cin, cout, ksz, rng), true);
    c.b = Tensor::zeros({cout}, true);
    c.stride = stride;
    if (stride == 1) {
        c.pad_left = (ksz - 1) / 2;
        c.pad_right = ksz / 2;
    } else {
        // Lout = floor(L/stride): for kernel 3 / stride 2 this is (1, 0);
        // for the 1x1 skip it is (0, -1), cropping the tail sample at odd L.
        c.pad_left = (ksz - 1) / 2;
        c.pad_right = ksz / 2 - stride + 1;
    }
    return c;
}

Tensor conv_forward(Graph& g, const ConvParams& c, const Tensor& x) {
    return g.conv1d_asym(x, c.w, c.b, c.stride, c.pad_left, c.pad_right);
}

ResidualBlock make_residual_block(int cin, int cout, int stride, Rng& rng) {
    ResidualBlock blk;
    blk.conv1 = make_conv(cin, cout, 3, stride, rng);
    blk.conv2 = make_conv(cout, cout, 3, 1, rng);
    if (cin != cout || stride != 1) blk.skip = make_conv(cin, cout, 1, stride, rng);
    return blk;
}

Tensor residual_block_forward(Graph& g, const ResidualBlock& blk, const Tensor& x) {
    Tensor h = conv_forward(g, blk.conv2, g.relu(conv_forward(g, blk.conv1, x)));
    Tensor s = blk.skip ? conv_forward(g, *blk.skip, x) : x;
    return g.relu(g.add(h, s));
}

Backbone make_backbone(const BackboneConfig& cfg, Rng& rng) {
    if (cfg.input_len < 32)
        throw ConfigError("backbone input length " + std::to_string(cfg.input_len) +
                          " is below the 32-sample minimum; the pyramid would collapse");
    if (cfg.stem_channels < 1 || cfg.blocks_per_stage < 1)
        throw ConfigError("backbone channel/block counts must be positive");
    Backbone bb;
    bb.cfg = cfg;
    bb.stem = make_conv(1, cfg.stem_channels, 7, 2, rng);
    int cin = cfg.stem_channels;
    for (int s = 0; s < 4; ++s) {
        std::vector<ResidualBlock> blocks;
        const int cout = cfg.stage_channels[static_cast<std::size_t>(s)];
        if (cout < 1) throw ConfigError("backbone stage channels must be positive");
        blocks.push_back(make_residual_block(cin, cout, 2, rng));
        for (int b = 1; b < cfg.blocks_per_stage; ++b)
            blocks.push_back(make_residual_block(cout, cout, 1, rng));
        bb.stages.push_back(std::move(blocks));
        cin = cout;
    }
    return bb;
}

Pyramid backbone_forward(Graph& g, const Backbone& bb, const Tensor& x) {
    if (x.rank() != 2 || x.dim(0) != 1 || x.dim(1) != bb.cfg.input_len)
        throw ShapeError("backbone expects [1," + std::to_string(bb.cfg.input_len) +
                         "] input, got " + shape_str(x.shape()));
    Tensor h = g.relu(conv_forward(g, bb.stem, x));
    Pyramid out;
    for (std::size_t s = 0; s < 4; ++s) {
        for (const auto& blk : bb.stages[s]) h = residual_block_forward(g, blk, h);
        out[s] = h;
    }
    return out;
}

std::array<int, 4> pyramid_lengths(int input_len) {
    std::array<int, 4> lens{};
    int l = input_len / 2;  // stem
    for (int s = 0; s < 4; ++s) {
        l /= 2;
        lens[static_cast<std::size_t>(s)] = l;
    }
    return lens;
}

FpnMerge make_fpn(const std::array<int, 4>& c_channels, int fpn_channels, Rng& rng) {
    if (fpn_channels < 1) throw ConfigError("fpn_channels must be positive");
    FpnMerge fpn;
    fpn.fpn_channels = fpn_channels;
    for (std::size_t i = 0; i < 4; ++i)
        fpn.lateral[i] = make_conv(c_channels[i], fpn_channels, 1, 1, rng);
    for (std::size_t i = 0; i < 3; ++i)
        fpn.merge[i] = make_conv(fpn_channels, fpn_channels, 3, 1, rng);
    return fpn;
}

Pyramid fpn_forward(Graph& g, const FpnMerge& fpn, const Pyramid& c) {
    for (std::size_t i = 0; i + 1 < 4; ++i)
        if (c[i].dim(1) < c[i + 1].dim(1))
            throw StateError("pyramid length monotonicity violated: level " + std::to_string(i + 2) +
                             " is " + shape_str(c[i].shape()) + " vs " +
                             shape_str(c[i + 1].shape()));
    Pyramid p;
    p[3] = conv_forward(g, fpn.lateral[3], c[3]);
    for (int i = 2; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        Tensor up = g.upsample_nearest(p[ui + 1], c[ui].dim(1));
        Tensor lat = conv_forward(g, fpn.lateral[ui], c[ui]);
        p[ui] = conv_forward(g, fpn.merge[ui], g.add(up, lat));
    }
    return p;
}

TokenProjector make_token_projector(int fpn_channels, int d_model, bool p2_only, Rng& rng) {
    TokenProjector tp;
    tp.d_model = d_model;
    tp.p2_only = p2_only;
    for (auto& proj : tp.proj) proj = nn::make_linear(fpn_channels, d_model, rng);
    return tp;
}

Tensor tokens_from_pyramid(Graph& g, const TokenProjector& tp, const Pyramid& p,
                           const Tensor& pos_encoding) {
    std::vector<Tensor> levels;
    const std::size_t n_levels = tp.p2_only ? 1 : 4;
    for (std::size_t i = 0; i < n_levels; ++i) {
        // [C,L] -> [L, d_model]: transpose and project in one matmul.
        Tensor t = g.matmul_ex(p[i], tp.proj[i].weight, true, true);
        levels.push_back(g.add_bias(t, tp.proj[i].bias));
    }
    Tensor tokens = n_levels == 1 ? levels[0] : g.concat_rows(levels);
    if (pos_encoding.shape() != tokens.shape())
        throw ShapeError("positional encoding " + shape_str(pos_encoding.shape()) +
                         " does not match tokens " + shape_str(tokens.shape()));
    return g.add(tokens, pos_encoding);
}

int token_count(int input_len, bool p2_only) {
    const auto lens = pyramid_lengths(input_len);
    if (p2_only) return lens[0];
    return lens[0] + lens[1] + lens[2] + lens[3];
}

}  // namespace vlfsig::msr
