#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "testutil.hpp"
#include "vlfsig/tensor.hpp"

using namespace vlfsig;
using testutil::gradcheck;
using testutil::random_tensor;
using testutil::weighted_sum;

TEST_CASE("tensor invariants") {
    Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.shape() == Shape{2, 3});
    CHECK_THROWS_AS(Tensor::from_values({2, 3}, {1, 2}), ShapeError);
    CHECK_THROWS_AS(Tensor::from_values({0, 3}, {}), ShapeError);
    CHECK_THROWS_AS(t.grad(), StateError);
}

TEST_CASE("matmul identity and 1x1") {
    Graph g;
    Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor m = Tensor::from_values({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor out = g.matmul(eye, m);
    for (int i = 0; i < 6; ++i) CHECK(out.values()[i] == m.values()[i]);

    Tensor a = Tensor::from_values({1, 1}, {2});
    Tensor b = Tensor::from_values({1, 1}, {3});
    CHECK(g.matmul(a, b).item() == 6.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
    Rng rng(7);
    Tensor a = random_tensor({3, 4}, rng, false);
    Tensor b = random_tensor({4, 2}, rng, false);
    Graph g;
    Tensor c = g.matmul(a, b);
    const auto ref = testutil::naive_matmul(a.values(), b.values(), 3, 4, 2);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(c.values()[i] - ref[i]) < 1e-12);
}

TEST_CASE("matmul shape error names both shapes") {
    Graph g;
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    try {
        (void)g.matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,2]") != std::string::npos);
    }
}

TEST_CASE("matmul gradients, all transpose combinations") {
    Rng rng(11);
    for (const bool ta : {false, true})
        for (const bool tb : {false, true}) {
            Tensor a = random_tensor(ta ? Shape{4, 3} : Shape{3, 4}, rng);
            Tensor b = random_tensor(tb ? Shape{2, 4} : Shape{4, 2}, rng);
            Tensor w = random_tensor({3, 2}, rng, false);
            auto rep = gradcheck(
                [&](Graph& g) { return weighted_sum(g, g.matmul_ex(a, b, ta, tb), w); }, {a, b});
            CAPTURE(ta);
            CAPTURE(tb);
            CHECK(rep.ok);
        }
}

TEST_CASE("conv1d identity kernel and hand oracle") {
    Graph g;
    Tensor x = Tensor::from_values({1, 4}, {1, 2, 3, 4});
    Tensor w1 = Tensor::from_values({1, 1, 1}, {1});
    Tensor b0 = Tensor::zeros({1});
    Tensor id = g.conv1d(x, w1, b0, 1, 0);
    for (int i = 0; i < 4; ++i) CHECK(id.values()[i] == x.values()[i]);

    // sliding dot product by hand: [1,2,3,4], k=[1,1], stride 2 -> [3,7]
    Tensor w2 = Tensor::from_values({1, 1, 2}, {1, 1});
    Tensor y = g.conv1d(x, w2, b0, 2, 0);
    REQUIRE(y.shape() == Shape{1, 2});
    CHECK(y.values()[0] == 3.0);
    CHECK(y.values()[1] == 7.0);
}

TEST_CASE("conv1d zero input yields bias everywhere") {
    Graph g;
    Tensor x = Tensor::zeros({2, 8});
    Rng rng(3);
    Tensor w = random_tensor({3, 2, 3}, rng, false);
    Tensor b = Tensor::from_values({3}, {0.5, -1.0, 2.0});
    Tensor y = g.conv1d(x, w, b, 1, 1);
    REQUIRE(y.shape() == Shape{3, 8});
    for (int co = 0; co < 3; ++co)
        for (int j = 0; j < 8; ++j) CHECK(y.values()[co * 8 + j] == b.values()[co]);
}

TEST_CASE("conv1d kernel longer than padded input") {
    Graph g;
    Tensor x = Tensor::zeros({1, 3});
    Tensor w = Tensor::zeros({1, 1, 6});
    Tensor b = Tensor::zeros({1});
    CHECK_THROWS_AS((void)g.conv1d(x, w, b, 1, 1), ShapeError);
}

TEST_CASE("conv1d matches the naive oracle with asymmetric pads") {
    Rng rng(9);
    for (const auto& [stride, pl, pr, k] :
         {std::tuple{1, 1, 1, 3}, {2, 1, 0, 3}, {2, 0, -1, 1}, {2, 3, 2, 7}}) {
        Tensor x = random_tensor({2, 11}, rng, false);
        Tensor w = random_tensor({3, 2, k}, rng, false);
        Tensor b = random_tensor({3}, rng, false);
        Graph g;
        Tensor y = g.conv1d_asym(x, w, b, stride, pl, pr);
        const auto ref =
            testutil::naive_conv1d(x.values(), 2, 11, w.values(), 3, k, b.values(), stride, pl, pr);
        REQUIRE(static_cast<std::size_t>(y.size()) == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(y.values()[i] - ref[i]) < 1e-12);
    }
}

TEST_CASE("conv1d is linear in x") {
    Rng rng(5);
    Tensor x1 = random_tensor({2, 10}, rng, false);
    Tensor x2 = random_tensor({2, 10}, rng, false);
    Tensor w = random_tensor({3, 2, 3}, rng, false);
    Tensor zero_b = Tensor::zeros({3});
    Graph g;
    std::vector<double> sum_x(static_cast<std::size_t>(x1.size()));
    for (std::int64_t i = 0; i < x1.size(); ++i)
        sum_x[static_cast<std::size_t>(i)] = x1.values()[i] + x2.values()[i];
    Tensor both = g.conv1d(Tensor::from_values({2, 10}, sum_x), w, zero_b, 2, 1);
    Tensor y1 = g.conv1d(x1, w, zero_b, 2, 1);
    Tensor y2 = g.conv1d(x2, w, zero_b, 2, 1);
    for (std::int64_t i = 0; i < both.size(); ++i)
        CHECK(std::abs(both.values()[i] - y1.values()[i] - y2.values()[i]) < 1e-12);
}

TEST_CASE("conv1d gradients incl. stride and asymmetric pads") {
    Rng rng(13);
    struct Case {
        int stride, pl, pr, k;
    };
    for (const auto& c : {Case{1, 1, 1, 3}, Case{2, 1, 0, 3}, Case{2, 0, -1, 1}, Case{3, 2, 2, 3}}) {
        Tensor x = random_tensor({2, 9}, rng);
        Tensor w = random_tensor({3, 2, c.k}, rng);
        Tensor b = random_tensor({3}, rng);
        const int lout = (9 + c.pl + c.pr - c.k) / c.stride + 1;
        Tensor rw = random_tensor({3, lout}, rng, false);
        auto rep = gradcheck(
            [&](Graph& g) {
                return weighted_sum(g, g.conv1d_asym(x, w, b, c.stride, c.pl, c.pr), rw);
            },
            {x, w, b});
        CAPTURE(c.stride);
        CHECK(rep.ok);
    }
}

TEST_CASE("softmax closed forms") {
    Graph g;
    Tensor u = Tensor::from_values({1, 4}, {0.7, 0.7, 0.7, 0.7});
    Tensor su = g.softmax(u, -1);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(su.values()[i] - 0.25) < 1e-15);

    Tensor x = Tensor::from_values({1, 2}, {0.0, std::log(3.0)});
    Tensor sx = g.softmax(x, -1);
    CHECK(std::abs(sx.values()[0] - 0.25) < 1e-12);
    CHECK(std::abs(sx.values()[1] - 0.75) < 1e-12);
}

TEST_CASE("softmax shift invariance and simplex property") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        Tensor x = random_tensor({3, 5}, rng, false, 4.0);
        const double c = rng.uniform(-20.0, 20.0);
        std::vector<double> shifted(x.values().begin(), x.values().end());
        for (auto& v : shifted) v += c;
        Graph g;
        Tensor a = g.softmax(x, -1);
        Tensor b = g.softmax(Tensor::from_values({3, 5}, shifted), -1);
        for (int r = 0; r < 3; ++r) {
            double row_sum = 0.0;
            for (int j = 0; j < 5; ++j) {
                const double v = a.values()[r * 5 + j];
                CHECK(std::abs(v - b.values()[r * 5 + j]) < 1e-12);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                row_sum += v;
            }
            CHECK(std::abs(row_sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("softmax along a non-terminal axis") {
    Rng rng(19);
    Tensor x = random_tensor({4, 3}, rng, false, 2.0);
    Graph g;
    Tensor y = g.softmax(x, 0);
    for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += y.values()[i * 3 + j];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax gradient") {
    Rng rng(23);
    Tensor x = random_tensor({3, 4}, rng, true, 3.0);
    Tensor w = random_tensor({3, 4}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.softmax(x, -1), w); }, {x}).ok);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.softmax(x, 0), w); }, {x}).ok);
}

TEST_CASE("layer_norm closed forms") {
    Graph g;
    Tensor gamma = Tensor::full({4}, 1.0);
    Tensor beta = Tensor::zeros({4});
    Tensor c = Tensor::from_values({1, 4}, {5, 5, 5, 5});
    Tensor yc = g.layer_norm(c, gamma, beta, 1e-5);
    for (int i = 0; i < 4; ++i) CHECK(yc.values()[i] == 0.0);

    Tensor pm = Tensor::from_values({1, 2}, {-1.0, 1.0});
    Tensor g2 = Tensor::full({2}, 1.0);
    Tensor b2 = Tensor::zeros({2});
    Tensor ypm = g.layer_norm(pm, g2, b2, 1e-12);
    CHECK(std::abs(ypm.values()[0] + 1.0) < 1e-9);
    CHECK(std::abs(ypm.values()[1] - 1.0) < 1e-9);
}

TEST_CASE("layer_norm moment oracle") {
    Rng rng(29);
    const double eps = 1e-5;
    Tensor x = random_tensor({5, 8}, rng, false, 3.0);
    Tensor gamma = Tensor::full({8}, 1.0);
    Tensor beta = Tensor::zeros({8});
    Graph g;
    Tensor y = g.layer_norm(x, gamma, beta, eps);
    for (int r = 0; r < 5; ++r) {
        double m = 0.0, var = 0.0;
        for (int j = 0; j < 8; ++j) m += y.values()[r * 8 + j];
        m /= 8;
        for (int j = 0; j < 8; ++j) {
            const double d = y.values()[r * 8 + j] - m;
            var += d * d;
        }
        var /= 8;
        CHECK(std::abs(m) < 1e-9);
        CHECK(var < 1.0 + 1e-9);  // variance sits just under 1 by the eps correction
        CHECK(var > 1.0 - 8 * eps);
    }
}

TEST_CASE("layer_norm gradient") {
    Rng rng(31);
    Tensor x = random_tensor({3, 6}, rng, true, 2.0);
    Tensor gamma = random_tensor({6}, rng);
    Tensor beta = random_tensor({6}, rng);
    Tensor w = random_tensor({3, 6}, rng, false);
    auto rep = gradcheck(
        [&](Graph& g) { return weighted_sum(g, g.layer_norm(x, gamma, beta, 1e-5), w); },
        {x, gamma, beta});
    CHECK(rep.ok);
}

TEST_CASE("upsample_nearest index map") {
    Graph g;
    Tensor x = Tensor::from_values({1, 2}, {1, 2});
    Tensor y = g.upsample_nearest(x, 4);
    REQUIRE(y.shape() == Shape{1, 4});
    CHECK(y.values()[0] == 1.0);
    CHECK(y.values()[1] == 1.0);
    CHECK(y.values()[2] == 2.0);
    CHECK(y.values()[3] == 2.0);

    // length 31 -> 62: every input sample repeated twice per the floor map
    std::vector<double> ramp(31);
    for (int i = 0; i < 31; ++i) ramp[static_cast<std::size_t>(i)] = i;
    Tensor r = g.upsample_nearest(Tensor::from_values({1, 31}, ramp), 62);
    for (int j = 0; j < 62; ++j) CHECK(r.values()[j] == static_cast<double>((j * 31) / 62));
    for (int j = 0; j < 62; j += 2) CHECK(r.values()[j] == r.values()[j + 1]);

    CHECK_THROWS_AS((void)g.upsample_nearest(r, 10), ShapeError);
}

TEST_CASE("relu absolute-value identity") {
    Rng rng(37);
    Tensor x = random_tensor({2, 6}, rng, false, 5.0);
    std::vector<double> neg(x.values().begin(), x.values().end());
    for (auto& v : neg) v = -v;
    Graph g;
    Tensor a = g.relu(x);
    Tensor b = g.relu(Tensor::from_values({2, 6}, neg));
    for (std::int64_t i = 0; i < x.size(); ++i)
        CHECK(a.values()[i] + b.values()[i] == std::abs(x.values()[i]));
}

TEST_CASE("elementwise and reshaping gradients") {
    Rng rng(41);
    Tensor x = random_tensor({3, 4}, rng, true, 2.0);
    Tensor y = random_tensor({3, 4}, rng, true, 2.0);
    Tensor w = random_tensor({3, 4}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.add(x, y), w); }, {x, y}).ok);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.mul(x, y), w); }, {x, y}).ok);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.relu(x), w); }, {x}).ok);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.scale(x, -1.7), w); }, {x}).ok);
    CHECK(gradcheck([&](Graph& g) { return g.mean(x); }, {x}).ok);

    Tensor wu = random_tensor({3, 9}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.upsample_nearest(x, 9), wu); }, {x})
              .ok);
    Tensor wr = random_tensor({1, 4}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.mean_rows(x), wr); }, {x}).ok);
    Tensor bias = random_tensor({4}, rng);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.add_bias(x, bias), w); }, {x, bias})
              .ok);
    Tensor wt = random_tensor({4, 3}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.transpose(x), wt); }, {x}).ok);
    Tensor ws = random_tensor({3, 2}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.slice_cols(x, 1, 3), ws); }, {x}).ok);
    Tensor wc = random_tensor({6, 4}, rng, false);
    CHECK(gradcheck(
              [&](Graph& g) {
                  const Tensor parts[] = {x, y};
                  return weighted_sum(g, g.concat_rows(parts), wc);
              },
              {x, y})
              .ok);
    Tensor wcc = random_tensor({3, 8}, rng, false);
    CHECK(gradcheck(
              [&](Graph& g) {
                  const Tensor parts[] = {x, y};
                  return weighted_sum(g, g.concat_cols(parts), wcc);
              },
              {x, y})
              .ok);
    Tensor batch = random_tensor({2, 3, 4}, rng);
    Tensor wp = random_tensor({3, 4}, rng, false);
    CHECK(gradcheck([&](Graph& g) { return weighted_sum(g, g.slice_plane(batch, 1), wp); },
                    {batch})
              .ok);
}

TEST_CASE("attend_scaled matches the composed route and gradchecks") {
    Rng rng(43);
    Tensor q = random_tensor({5, 3}, rng);
    Tensor k = random_tensor({5, 3}, rng);
    const double alpha = 1.0 / std::sqrt(3.0);
    Graph g;
    Tensor fused = g.attend_scaled(q, k, alpha);
    Tensor composed = g.softmax(g.scale(g.matmul_ex(q, k, false, true), alpha), -1);
    for (std::int64_t i = 0; i < fused.size(); ++i)
        CHECK(std::abs(fused.values()[i] - composed.values()[i]) < 1e-12);

    Tensor w = random_tensor({5, 5}, rng, false);
    CHECK(gradcheck([&](Graph& gg) { return weighted_sum(gg, gg.attend_scaled(q, k, alpha), w); },
                    {q, k})
              .ok);
}

TEST_CASE("cross_entropy values and gradient") {
    Graph g;
    Tensor uniform = Tensor::zeros({1, 10});
    const int label0 = 3;
    CHECK(std::abs(g.cross_entropy(uniform, std::span<const int>(&label0, 1)).item() -
                   std::log(10.0)) < 1e-12);

    std::vector<double> big(10, 0.0);
    big[4] = 50.0;
    const int label4 = 4;
    CHECK(g.cross_entropy(Tensor::from_values({1, 10}, big), std::span<const int>(&label4, 1))
              .item() < 1e-9);

    // two-record hand case
    Tensor two = Tensor::from_values({2, 3}, {1.0, 2.0, 0.5, -1.0, 0.0, 3.0});
    const int labels[] = {1, 2};
    const auto lse = [](double a, double b, double c) {
        const double m = std::max({a, b, c});
        return m + std::log(std::exp(a - m) + std::exp(b - m) + std::exp(c - m));
    };
    const double expected = ((lse(1.0, 2.0, 0.5) - 2.0) + (lse(-1.0, 0.0, 3.0) - 3.0)) / 2.0;
    CHECK(std::abs(g.cross_entropy(two, labels).item() - expected) < 1e-12);

    const int bad_labels[] = {1, 7};
    CHECK_THROWS_AS((void)g.cross_entropy(two, bad_labels), ConfigError);

    Rng rng(47);
    Tensor logits = random_tensor({4, 6}, rng, true, 3.0);
    const std::vector<int> labv{0, 5, 2, 2};
    CHECK(gradcheck([&](Graph& gg) { return gg.cross_entropy(logits, labv); }, {logits}).ok);
}

TEST_CASE("backward analytic cases") {
    // d(x^2)/dx = 2x
    Tensor x = Tensor::scalar(3.0, true);
    Graph g;
    g.backward(g.mul(x, x));
    CHECK(x.grad()[0] == 6.0);

    // d(sum)/dx = 1
    Tensor v = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Graph g2;
    g2.backward(g2.scale(g2.mean(v), static_cast<double>(v.size())));
    for (double gv : v.grad()) CHECK(gv == 1.0);

    // fan-out: d(x+x)/dx == 2 exactly
    Tensor z = Tensor::scalar(1.25, true);
    Graph g3;
    g3.backward(g3.add(z, z));
    CHECK(z.grad()[0] == 2.0);
}

TEST_CASE("backward error contracts") {
    Tensor x = Tensor::from_values({2, 2}, {1, 2, 3, 4}, true);
    Graph g;
    Tensor y = g.relu(x);
    CHECK_THROWS_AS(g.backward(y), ShapeError);  // non-scalar loss
    Tensor loss = g.mean(y);
    g.backward(loss);
    CHECK_THROWS_AS(g.backward(loss), StateError);  // consumed graph
}

TEST_CASE("graph topology: inputs precede consumers, nodes visited once") {
    Rng rng(53);
    Tensor x = random_tensor({2, 8}, rng);
    Tensor w = random_tensor({3, 2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor gamma = Tensor::full({8}, 1.0, true);
    Tensor beta = Tensor::zeros({8}, true);
    Graph g;
    Tensor loss = g.mean(g.layer_norm(g.relu(g.conv1d(x, w, b, 1, 1)), gamma, beta, 1e-5));
    (void)loss;
    const auto topo = g.topology();
    std::vector<std::uint64_t> produced;
    for (const auto& [inputs, out] : topo) {
        for (auto id : inputs) {
            // an input is either already produced or never produced (a leaf)
            const bool seen =
                std::find(produced.begin(), produced.end(), id) != produced.end();
            bool produced_later = false;
            for (const auto& [in2, out2] : topo)
                if (out2 == id && !seen) produced_later = true;
            if (!seen) CHECK_FALSE(produced_later);
        }
        CHECK(std::find(produced.begin(), produced.end(), out) == produced.end());
        produced.push_back(out);
    }
}

TEST_CASE("composite chain matches finite differences") {
    Rng rng(59);
    Tensor x = random_tensor({2, 12}, rng);
    Tensor w = random_tensor({3, 2, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor gamma = random_tensor({12}, rng);
    Tensor beta = random_tensor({12}, rng);
    auto rep = gradcheck(
        [&](Graph& g) {
            return g.mean(g.layer_norm(g.relu(g.conv1d(x, w, b, 1, 1)), gamma, beta, 1e-5));
        },
        {x, w, b, gamma, beta}, 1e-4);
    CHECK(rep.ok);
    CHECK(rep.max_rel < 1e-5);
}

TEST_CASE("forward determinism is bit-exact") {
    const auto run = [] {
        Rng rng(61);
        Tensor x = testutil::random_tensor({2, 16}, rng, false);
        Tensor w = testutil::random_tensor({4, 2, 3}, rng, false);
        Tensor b = testutil::random_tensor({4}, rng, false);
        Graph g;
        Tensor y = g.softmax(g.conv1d(x, w, b, 2, 1), -1);
        return std::vector<double>(y.values().begin(), y.values().end());
    };
    const auto a = run();
    const auto b = run();
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
