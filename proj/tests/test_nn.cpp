#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "vlfsig/nn.hpp"

using namespace vlfsig;
using namespace vlfsig::nn;
using testutil::gradcheck;
using testutil::random_tensor;
using testutil::weighted_sum;

namespace {

LinearLayer identity_linear(int d) {
    LinearLayer l;
    std::vector<double> eye(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) eye[static_cast<std::size_t>(i) * d + i] = 1.0;
    l.weight = Tensor::from_values({d, d}, eye, true);
    l.bias = Tensor::zeros({d}, true);
    return l;
}

void zero_params(LinearLayer& l) {
    for (auto& v : l.weight.values_mut()) v = 0.0;
    for (auto& v : l.bias.values_mut()) v = 0.0;
}

}  // namespace

TEST_CASE("linear_forward closed forms") {
    Graph g;
    LinearLayer id = identity_linear(3);
    Tensor x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor y = linear_forward(g, id, x);
    for (int i = 0; i < 6; ++i) CHECK(y.values()[i] == x.values()[i]);

    LinearLayer bias_only;
    bias_only.weight = Tensor::zeros({2, 3}, true);
    bias_only.bias = Tensor::from_values({2}, {0.5, -1.5}, true);
    Tensor yb = linear_forward(g, bias_only, x);
    for (int r = 0; r < 2; ++r) {
        CHECK(yb.values()[r * 2 + 0] == 0.5);
        CHECK(yb.values()[r * 2 + 1] == -1.5);
    }
}

TEST_CASE("linear_forward matches the matmul+add composition") {
    Rng rng(101);
    LinearLayer l = make_linear(3, 2, rng);
    Tensor x = random_tensor({2, 3}, rng, false);
    Graph g;
    Tensor y = linear_forward(g, l, x);
    Tensor ref = g.add_bias(g.matmul_ex(x, l.weight, false, true), l.bias);
    for (std::int64_t i = 0; i < y.size(); ++i) CHECK(y.values()[i] == ref.values()[i]);

    Tensor bad = Tensor::zeros({2, 5});
    CHECK_THROWS_AS((void)linear_forward(g, l, bad), ShapeError);
}

TEST_CASE("linear gradient") {
    Rng rng(103);
    LinearLayer l = make_linear(4, 3, rng);
    Tensor x = random_tensor({2, 4}, rng);
    Tensor w = random_tensor({2, 3}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, linear_forward(g, l, x), w); },
                    {x, l.weight, l.bias})
              .ok);
}

TEST_CASE("attention single token returns v") {
    Rng rng(107);
    Tensor q = random_tensor({1, 4}, rng, false);
    Tensor k = random_tensor({1, 4}, rng, false);
    Tensor v = random_tensor({1, 4}, rng, false);
    Graph g;
    Tensor out = attention(g, q, k, v);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(out.values()[i] - v.values()[i]) < 1e-15);
}

TEST_CASE("attention with identical keys averages v") {
    Rng rng(109);
    std::vector<double> krow{0.3, -0.7, 1.1};
    std::vector<double> kk;
    for (int i = 0; i < 4; ++i) kk.insert(kk.end(), krow.begin(), krow.end());
    Tensor q = random_tensor({4, 3}, rng, false);
    Tensor k = Tensor::from_values({4, 3}, kk);
    Tensor v = random_tensor({4, 3}, rng, false);
    Graph g;
    Tensor out = attention(g, q, k, v);
    for (int j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (int t = 0; t < 4; ++t) mean += v.values()[t * 3 + j];
        mean /= 4.0;
        for (int t = 0; t < 4; ++t) CHECK(std::abs(out.values()[t * 3 + j] - mean) < 1e-12);
    }
}

TEST_CASE("attention two-token closed form") {
    // T=2, d=1: weights are softmax([q_i k_0, q_i k_1])
    Tensor q = Tensor::from_values({2, 1}, {0.5, -1.0});
    Tensor k = Tensor::from_values({2, 1}, {1.0, 2.0});
    Tensor v = Tensor::from_values({2, 1}, {3.0, 5.0});
    Graph g;
    Tensor out = attention(g, q, k, v);
    for (int i = 0; i < 2; ++i) {
        const double l0 = q.values()[i] * 1.0, l1 = q.values()[i] * 2.0;
        const double m = std::max(l0, l1);
        const double w0 = std::exp(l0 - m), w1 = std::exp(l1 - m);
        const double expected = (w0 * 3.0 + w1 * 5.0) / (w0 + w1);
        CHECK(std::abs(out.values()[i] - expected) < 1e-12);
    }
}

TEST_CASE("attention gradient") {
    Rng rng(113);
    Tensor q = random_tensor({3, 2}, rng);
    Tensor k = random_tensor({3, 2}, rng);
    Tensor v = random_tensor({3, 2}, rng);
    Tensor w = random_tensor({3, 2}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, attention(g, q, k, v), w); }, {q, k, v})
              .ok);
}

TEST_CASE("mha with one head and identity projections reduces to attention") {
    Rng rng(127);
    MultiHeadAttention mha;
    mha.n_heads = 1;
    mha.d_model = 4;
    mha.q_proj = identity_linear(4);
    mha.k_proj = identity_linear(4);
    mha.v_proj = identity_linear(4);
    mha.out_proj = identity_linear(4);
    Tensor x = random_tensor({5, 4}, rng, false);
    Graph g;
    Tensor a = mha_forward(g, mha, x);
    Tensor b = attention(g, x, x, x);
    for (std::int64_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-12);
}

TEST_CASE("mha output shape and config validation") {
    Rng rng(131);
    MultiHeadAttention mha = make_mha(6, 3, rng);
    for (int t : {1, 4, 9}) {
        Graph g;
        CHECK(mha_forward(g, mha, random_tensor({t, 6}, rng, false)).shape() == Shape{t, 6});
    }
    CHECK_THROWS_AS((void)make_mha(6, 4, rng), ConfigError);
}

TEST_CASE("mha two heads matches the per-head manual computation") {
    Rng rng(137);
    MultiHeadAttention mha = make_mha(4, 2, rng);
    Tensor x = random_tensor({3, 4}, rng, false);
    Graph g;
    Tensor out = mha_forward(g, mha, x);

    // manual: project, split columns, per-head softmax(q k^T / sqrt(2)) v,
    // concat, out-project
    Tensor q = linear_forward(g, mha.q_proj, x);
    Tensor k = linear_forward(g, mha.k_proj, x);
    Tensor v = linear_forward(g, mha.v_proj, x);
    std::vector<double> concat(3 * 4);
    for (int h = 0; h < 2; ++h) {
        const int c0 = 2 * h;
        for (int i = 0; i < 3; ++i) {
            double logits[3];
            for (int j = 0; j < 3; ++j)
                logits[j] = (q.values()[i * 4 + c0] * k.values()[j * 4 + c0] +
                             q.values()[i * 4 + c0 + 1] * k.values()[j * 4 + c0 + 1]) /
                            std::sqrt(2.0);
            const double m = std::max({logits[0], logits[1], logits[2]});
            double wsum = 0.0, acc0 = 0.0, acc1 = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double e = std::exp(logits[j] - m);
                wsum += e;
                acc0 += e * v.values()[j * 4 + c0];
                acc1 += e * v.values()[j * 4 + c0 + 1];
            }
            concat[static_cast<std::size_t>(i * 4 + c0)] = acc0 / wsum;
            concat[static_cast<std::size_t>(i * 4 + c0 + 1)] = acc1 / wsum;
        }
    }
    Tensor ref = linear_forward(g, mha.out_proj, Tensor::from_values({3, 4}, concat));
    for (std::int64_t i = 0; i < out.size(); ++i)
        CHECK(std::abs(out.values()[i] - ref.values()[i]) < 1e-12);
}

TEST_CASE("encoder layer with zeroed branch outputs is the identity") {
    Rng rng(139);
    EncoderLayer layer = make_encoder_layer(4, 2, 16, rng);
    zero_params(layer.mha.out_proj);
    zero_params(layer.ffn2);
    Tensor x = random_tensor({5, 4}, rng, false);
    Graph g;
    Tensor y = encoder_layer_forward(g, layer, x);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("encoder layer preserves shape across a stack") {
    Rng rng(149);
    EncoderLayer l1 = make_encoder_layer(6, 3, 24, rng);
    EncoderLayer l2 = make_encoder_layer(6, 3, 24, rng);
    Graph g;
    Tensor x = random_tensor({7, 6}, rng, false);
    Tensor y = encoder_layer_forward(g, l2, encoder_layer_forward(g, l1, x));
    CHECK(y.shape() == Shape{7, 6});
}

TEST_CASE("encoder layer token-permutation equivariance") {
    Rng rng(151);
    EncoderLayer layer = make_encoder_layer(4, 2, 8, rng);
    Tensor x = random_tensor({5, 4}, rng, false);
    const int perm[5] = {3, 0, 4, 1, 2};
    std::vector<double> px(5 * 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            px[static_cast<std::size_t>(i * 4 + j)] = x.values()[perm[i] * 4 + j];
    Graph g;
    Tensor y = encoder_layer_forward(g, layer, x);
    Tensor py = encoder_layer_forward(g, layer, Tensor::from_values({5, 4}, px));
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(std::abs(py.values()[i * 4 + j] - y.values()[perm[i] * 4 + j]) < 1e-12);
}

TEST_CASE("encoder layer gradient vs finite differences") {
    Rng rng(157);
    EncoderLayer layer = make_encoder_layer(4, 2, 8, rng);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({3, 4}, rng, false);
    auto rep = gradcheck(
        [&](Graph& g) { return weighted_sum(g, encoder_layer_forward(g, layer, x), w); },
        {x, layer.mha.q_proj.weight, layer.mha.out_proj.weight, layer.ffn1.weight,
         layer.ffn1.bias, layer.ln1.gamma, layer.ln2.beta});
    CHECK(rep.ok);
    CHECK(rep.max_rel < 1e-5);
}

TEST_CASE("positional encoding closed forms") {
    Tensor pe = positional_encoding(8, 6);
    REQUIRE(pe.shape() == Shape{8, 6});
    for (int i = 0; i < 3; ++i) {
        CHECK(pe.values()[2 * i] == 0.0);      // sin 0
        CHECK(pe.values()[2 * i + 1] == 1.0);  // cos 0
    }
    CHECK(std::abs(pe.values()[6 + 0] - std::sin(1.0)) < 1e-15);
    CHECK(std::abs(pe.values()[6 + 1] - std::cos(1.0)) < 1e-15);
    for (double v : pe.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    CHECK_THROWS_AS((void)positional_encoding(8, 5), ConfigError);
}

TEST_CASE("global_mean_pool") {
    Graph g;
    Tensor one = Tensor::from_values({1, 3}, {4, 5, 6});
    Tensor p1 = global_mean_pool(g, one);
    REQUIRE(p1.shape() == Shape{3});
    for (int i = 0; i < 3; ++i) CHECK(p1.values()[i] == one.values()[i]);

    Tensor c = Tensor::from_values({4, 2}, {1.5, -2, 1.5, -2, 1.5, -2, 1.5, -2});
    Tensor pc = global_mean_pool(g, c);
    CHECK(pc.values()[0] == 1.5);
    CHECK(pc.values()[1] == -2.0);

    Tensor two = Tensor::from_values({2, 2}, {0, 2, 2, 0});
    Tensor pt = global_mean_pool(g, two);
    CHECK(pt.values()[0] == 1.0);
    CHECK(pt.values()[1] == 1.0);
}
