#include <catch2/catch_amalgamated.hpp>

#include <ednn/adam.hpp>
#include <ednn/exact_sum.hpp>
#include <ednn/graph.hpp>
#include <ednn/kernels.hpp>

#include "oracles.hpp"

using namespace ednn;

TEST_CASE("exact accumulator matches naive sum on benign data") {
    std::mt19937_64 rng(1);
    std::vector<double> xs;
    double plain = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double v = (double(rng() % 2001) - 1000.0) / 64.0;  // exactly representable
        xs.push_back(v);
        plain += v;
    }
    REQUIRE(exact_sum(std::span<const double>(xs)) == plain);
}

TEST_CASE("exact accumulator is order invariant on cancellation-heavy data") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> xs;
    for (int i = 0; i < 500; ++i) {
        double v = dist(rng) * std::pow(10.0, int(rng() % 30) - 15);
        xs.push_back(v);
        xs.push_back(-v * 0.5);
    }
    double fwd = exact_sum(std::span<const double>(xs));
    std::reverse(xs.begin(), xs.end());
    double rev = exact_sum(std::span<const double>(xs));
    std::shuffle(xs.begin(), xs.end(), rng);
    double shuf = exact_sum(std::span<const double>(xs));
    REQUIRE(fwd == rev);
    REQUIRE(fwd == shuf);
}

TEST_CASE("exact accumulator resolves catastrophic cancellation") {
    ExactAccumulator acc;
    acc.add(1e300);
    acc.add(1.0);
    acc.add(-1e300);
    REQUIRE(acc.result() == 1.0);

    ExactAccumulator acc2;
    acc2.add(0x1.0p-1000);
    acc2.add(0x1.0p1000);
    acc2.add(-0x1.0p1000);
    REQUIRE(acc2.result() == 0x1.0p-1000);
}

TEMPLATE_TEST_CASE("gemm matches the naive product", "", float, double) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto [m, n, k] : {std::array<std::size_t, 3>{1, 1, 1},
                           {3, 5, 7},
                           {9, 64, 16},
                           {17, 130, 33},
                           {36, 576, 64}}) {
        std::vector<TestType> a(m * k), b(k * n);
        for (auto& v : a) v = static_cast<TestType>(dist(rng));
        for (auto& v : b) v = static_cast<TestType>(dist(rng));
        std::vector<TestType> c(m * n);
        gemm_nn(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
        auto want = oracle::naive_matmul(m, n, k, a.data(), b.data());
        double tol = sizeof(TestType) == 4 ? 1e-4 : 1e-12;
        for (std::size_t i = 0; i < c.size(); ++i)
            REQUIRE(oracle::rel_error(c[i], want[i]) < tol);
    }
}

TEST_CASE("gemm_tn matches transposed naive product") {
    // C[K,N] = A[M,K]^T * B[M,N]
    std::mt19937_64 rng(4);
    std::normal_distribution<double> dist(0.0, 1.0);
    const std::size_t M = 25, K = 18, N = 40;
    std::vector<double> a(M * K), b(M * N);
    for (auto& v : a) v = dist(rng);
    for (auto& v : b) v = dist(rng);
    std::vector<double> at(K * M);
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t p = 0; p < K; ++p) at[p * M + i] = a[i * K + p];
    std::vector<double> c(K * N, 0.0);
    gemm_tn(M, N, K, a.data(), K, b.data(), N, c.data(), N, false);
    auto want = oracle::naive_matmul(K, N, M, at.data(), b.data());
    for (std::size_t i = 0; i < c.size(); ++i) REQUIRE(oracle::rel_error(c[i], want[i]) < 1e-12);
}

TEST_CASE("conv2d same-padding geometry") {
    // ceil(in/S) with the extra padding pixel at bottom/right.
    auto g = make_conv_geom(24, 24, 1, 4, 64, 2);
    REQUIRE(g.out_h == 12);
    REQUIRE(g.out_w == 12);
    REQUIRE(g.pad_top == 1);  // total padding 2, split 1/1
    auto g3 = make_conv_geom(3, 3, 64, 4, 64, 2);
    REQUIRE(g3.out_h == 2);
    REQUIRE(g3.pad_top == 1);  // total 3: 1 top, 2 bottom
}

TEMPLATE_TEST_CASE("conv2d forward matches the direct convolution", "", float, double) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist(0.0, 1.0);
    // Spatial sizes cover the f=8 c=8 chain (24,12,6,3) plus odd cases.
    for (std::size_t side : {24u, 12u, 6u, 3u, 5u, 7u}) {
        std::size_t cin = side == 24 ? 1 : 3, cout = 5, B = 2;
        Tensor<TestType> x({B, side, side, cin}), w({4, 4, cin, cout}), b({cout});
        for (auto& v : x.data) v = static_cast<TestType>(dist(rng));
        for (auto& v : w.data) v = static_cast<TestType>(dist(rng));
        for (auto& v : b.data) v = static_cast<TestType>(dist(rng));
        Tensor<TestType> y = conv2d(x, w, b, 2);
        Tensor<TestType> want = oracle::naive_conv2d(x, w, b, 2);
        REQUIRE(y.shape == want.shape);
        double tol = sizeof(TestType) == 4 ? 2e-4 : 1e-12;
        for (std::size_t i = 0; i < y.size(); ++i)
            REQUIRE(oracle::rel_error(y[i], want[i]) < tol);
    }
}

TEST_CASE("conv2d with an averaging kernel computes local means") {
    // 5x5 input, all-ones 1-channel image, kernel of 1/16 everywhere,
    // stride 1, 4x4 kernel: interior outputs equal 1 exactly.
    Tensor<double> x({1, 8, 8, 1});
    for (auto& v : x.data) v = 1.0;
    Tensor<double> w({4, 4, 1, 1});
    for (auto& v : w.data) v = 1.0 / 16.0;
    Tensor<double> b({1});
    Tensor<double> y = conv2d(x, w, b, 1);
    REQUIRE(y.dim(1) == 8);
    // Fully-covered interior position: all 16 taps inside.
    REQUIRE(y[(3 * 8 + 3)] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense forward matches the naive product and flattens rank-4 input") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor<double> x({3, 2, 2, 4}), w({16, 5}), b({5});
    for (auto& v : x.data) v = dist(rng);
    for (auto& v : w.data) v = dist(rng);
    for (auto& v : b.data) v = dist(rng);
    Tensor<double> y = dense(x, w, b);
    REQUIRE(y.shape == Shape{3, 5});
    auto want = oracle::naive_matmul<double>(3, 5, 16, x.ptr(), w.ptr());
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j)
            REQUIRE(oracle::rel_error(y[i * 5 + j], want[i * 5 + j] + b[j]) < 1e-12);
}

TEST_CASE("relu clamps negatives and passes positives") {
    Tensor<double> x({5}, {-2.0, -0.0, 0.0, 3.5, 1e-9});
    Tensor<double> y = relu(x);
    REQUIRE(y.data == std::vector<double>{0.0, 0.0, 0.0, 3.5, 1e-9});
}

TEST_CASE("mse_loss hand values") {
    Tensor<double> pred({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor<double> label({2, 2}, {0.0, 2.0, 5.0, 1.0});
    // ((1)^2 + 0 + (-2)^2 + (3)^2) / 4 = 14/4
    REQUIRE(mse_loss(pred, label) == Catch::Approx(3.5).epsilon(1e-15));
    REQUIRE(mse_loss(pred, pred) == 0.0);
}

TEST_CASE("shape errors name the offender") {
    Tensor<double> x({1, 8, 8, 2}), w({4, 4, 3, 5}), b({5});
    REQUIRE_THROWS_AS(conv2d(x, w, b, 2), ShapeError);
    Tensor<double> d({2, 10}), wd({11, 4}), bd({4});
    REQUIRE_THROWS_AS(dense(d, wd, bd), ShapeError);
    Tensor<double> p({3}), q({4});
    REQUIRE_THROWS_AS(mse_loss(p, q), ShapeError);
}

TEST_CASE("dense backward hand-derived: d/dw of (wx - y)^2 is 2(wx - y)x") {
    Graph<double> g;
    auto x = g.input({1, 1});
    auto w = g.param({1, 1});
    auto b = g.param({1});
    auto pred = g.dense(x, w, b);
    auto label = g.input({1, 1});
    auto loss = g.mse(pred, label);
    g.val(x)[0] = 3.0;
    g.val(w)[0] = 2.0;
    g.val(b)[0] = 0.5;
    g.val(label)[0] = 1.0;
    g.forward();
    g.backward(loss);
    const double resid = 2.0 * 3.0 + 0.5 - 1.0;  // 5.5
    REQUIRE(g.val(loss)[0] == Catch::Approx(resid * resid));
    REQUIRE(g.grad(w)[0] == Catch::Approx(2.0 * resid * 3.0));
    REQUIRE(g.grad(b)[0] == Catch::Approx(2.0 * resid));
}

TEST_CASE("finite differences confirm every primitive's gradient across seeds") {
    // 64-bit graph conv -> relu -> dense -> sum_tiles -> mse; every
    // parameter entry checked by central differences over 20 seeds.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> dist(0.0, 1.0);
        Graph<double> g;
        const std::size_t nt = 4;  // 2 images x 2 tiles
        auto tiles = g.input({nt, 4, 4, 1});
        auto w1 = g.param({2, 2, 1, 3});
        auto b1 = g.param({3});
        auto w2 = g.param({12, 2});
        auto b2 = g.param({2});
        auto x = g.relu(g.conv2d(tiles, w1, b1, 2));
        auto contrib = g.dense(x, w2, b2);
        auto counts = g.sum_tiles(contrib, 2);
        auto labels = g.input({2, 2});
        auto loss = g.mse(counts, labels);

        for (auto node : {tiles, w1, b1, w2, b2, labels})
            for (auto& v : g.val(node).data) v = dist(rng);

        auto loss_value = [&]() {
            g.forward();
            return static_cast<double>(g.val(loss)[0]);
        };
        loss_value();
        g.backward(loss);
        std::vector grads = {g.grad(w1), g.grad(b1), g.grad(w2), g.grad(b2)};
        std::vector nodes = {w1, b1, w2, b2};
        for (std::size_t p = 0; p < nodes.size(); ++p)
            for (std::size_t i = 0; i < grads[p].size(); ++i) {
                double fd = oracle::fd_gradient(g.val(nodes[p]), i, 1e-6, loss_value);
                double an = grads[p][i];
                if (std::fabs(fd) < 1e-10 && std::fabs(an) < 1e-10) continue;
                REQUIRE(oracle::rel_error(an, fd) < 1e-4);
            }
    }
}

TEST_CASE("network output is linear over tile concatenation (extensivity of the sum)") {
    // Same tiles, summed in one batch vs two halves: counts add exactly.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> dist(0.0, 1.0);
    Graph<double> g;
    auto tiles = g.input({6, 4, 4, 1});
    auto w = g.param({2, 2, 1, 2});
    auto b = g.param({2});
    auto wd = g.param({8, 1});
    auto bd = g.param({1});
    auto contrib = g.dense(g.relu(g.conv2d(tiles, w, b, 2)), wd, bd);
    auto counts = g.sum_tiles(contrib, 1);
    for (auto n : {tiles, w, b, wd, bd})
        for (auto& v : g.val(n).data) v = dist(rng);
    g.forward();
    double whole = g.val(counts)[0];
    double parts = 0.0;
    ExactAccumulator acc;
    for (std::size_t t = 0; t < 6; ++t) acc.add(g.val(contrib)[t]);
    parts = acc.result();
    REQUIRE(whole == parts);  // identical summation path
}

TEST_CASE("adam first step moves each parameter by lr against the gradient sign") {
    ParamSet<double> params;
    params.add("w", Tensor<double>({3}, {1.0, -2.0, 0.0}));
    Tensor<double> g({3}, {0.5, -1.0, 2.0});
    AdamConfig cfg;
    cfg.lr = 0.1;
    std::vector<Tensor<double>> grads{g};
    adam_step(params, std::span<const Tensor<double>>(grads), cfg);
    // With bias correction, |step 1| = lr * g / (|g| + eps') ~= lr.
    REQUIRE(params.entries[0].value[0] == Catch::Approx(1.0 - 0.1).margin(1e-6));
    REQUIRE(params.entries[0].value[1] == Catch::Approx(-2.0 + 0.1).margin(1e-6));
    REQUIRE(params.entries[0].value[2] == Catch::Approx(0.0 - 0.1).margin(1e-6));
    REQUIRE(params.step_count == 1);
}

TEST_CASE("adam minimizes a quadratic") {
    ParamSet<double> params;
    params.add("w", Tensor<double>({2}, {5.0, -3.0}));
    AdamConfig cfg;
    cfg.lr = 0.05;
    for (int i = 0; i < 2000; ++i) {
        Tensor<double> g({2});
        g[0] = 2.0 * (params.entries[0].value[0] - 1.5);
        g[1] = 2.0 * (params.entries[0].value[1] + 0.5);
        std::vector<Tensor<double>> grads{std::move(g)};
        adam_step(params, std::span<const Tensor<double>>(grads), cfg);
    }
    REQUIRE(params.entries[0].value[0] == Catch::Approx(1.5).margin(1e-3));
    REQUIRE(params.entries[0].value[1] == Catch::Approx(-0.5).margin(1e-3));
}

TEST_CASE("adam is deterministic and aborts cleanly on non-finite gradients") {
    auto run = [] {
        ParamSet<float> p;
        p.add("w", Tensor<float>({4}, {1.f, 2.f, 3.f, 4.f}));
        AdamConfig cfg;
        for (int i = 0; i < 10; ++i) {
            Tensor<float> g({4}, {0.1f, -0.2f, 0.3f, -0.4f});
            std::vector<Tensor<float>> grads{std::move(g)};
            adam_step(p, std::span<const Tensor<float>>(grads), cfg);
        }
        return p.entries[0].value.data;
    };
    REQUIRE(run() == run());

    ParamSet<double> p;
    p.add("w", Tensor<double>({2}, {1.0, 2.0}));
    auto before = p.entries[0].value.data;
    Tensor<double> g({2}, {0.1, std::nan("")});
    std::vector<Tensor<double>> grads{std::move(g)};
    AdamConfig cfg;
    REQUIRE_THROWS_AS(adam_step(p, std::span<const Tensor<double>>(grads), cfg), DivergenceError);
    REQUIRE(p.entries[0].value.data == before);  // no partial update
    REQUIRE(p.step_count == 0);
}
