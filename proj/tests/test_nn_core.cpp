#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aesthnet/ops.hpp"
#include "aesthnet/optim.hpp"
#include "aesthnet/rng.hpp"
#include "oracles.hpp"

using namespace aesthnet;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool rg = true, double scale = 1.0) {
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = rng.normal(0.0, scale);
    return Tensor(std::move(shape), std::move(d), rg);
}

}  // namespace

TEST_CASE("linear forward identity and hand product") {
    Tensor x({2}, {1, 2});
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor b0({2}, {0, 0});
    auto y = linear(x, eye, b0);
    CHECK(y.at(0) == doctest::Approx(1));
    CHECK(y.at(1) == doctest::Approx(2));

    Tensor x2({2}, {1, 1});
    Tensor w({2, 2}, {2, 3, 4, 5});
    Tensor b1({2}, {1, 1});
    auto y2 = linear(x2, w, b1);
    CHECK(y2.at(0) == doctest::Approx(7));
    CHECK(y2.at(1) == doctest::Approx(9));
}

TEST_CASE("linear shape mismatch names both shapes") {
    Tensor x({3}, {1, 2, 3});
    Tensor w({2, 2}, {1, 0, 0, 1});
    Tensor b({2}, {0, 0});
    CHECK_THROWS_WITH_AS(linear(x, w, b),
                         doctest::Contains("[3]"), DimensionError);
}

TEST_CASE("linear gradient matches finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor(rng, {3, 4});
        auto w = random_tensor(rng, {4, 5});
        auto b = random_tensor(rng, {5});
        auto build = [&] { return sum(linear(x, w, b)); };
        CHECK(oracle::grad_check(w, build) < 1e-4);
        CHECK(oracle::grad_check(x, build) < 1e-4);
        CHECK(oracle::grad_check(b, build) < 1e-4);
    }
}

TEST_CASE("activations: relu, softmax, l2_normalize basics") {
    Tensor x({3}, {-1, 0, 2});
    auto r = relu(x);
    CHECK(r.at(0) == 0);
    CHECK(r.at(1) == 0);
    CHECK(r.at(2) == 2);

    auto sm = softmax(Tensor({5}, {0, 0, 0, 0, 0}));
    for (std::size_t i = 0; i < 5; ++i) CHECK(sm.at(i) == doctest::Approx(0.2));

    auto n = l2_normalize(Tensor({2}, {3, 4}));
    CHECK(n.at(0) == doctest::Approx(0.6));
    CHECK(n.at(1) == doctest::Approx(0.8));

    CHECK_THROWS_AS(l2_normalize(Tensor({3}, {0, 0, 0})), ValidationError);
}

TEST_CASE("softmax properties: normalization and shift invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor(rng, {7}, false, 3.0);
        auto y = softmax(x);
        double total = 0.0;
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(y.at(i) > 0.0);
            total += y.at(i);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

        const double c = rng.uniform(-5, 5);
        std::vector<double> shifted(x.data().begin(), x.data().end());
        for (auto& v : shifted) v += c;
        auto y2 = softmax(Tensor({7}, shifted));
        for (std::size_t i = 0; i < 7; ++i)
            CHECK(std::abs(y.at(i) - y2.at(i)) < 1e-9);
    }
}

TEST_CASE("softmax and l2_normalize gradients") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor(rng, {6});
        Tensor coef = random_tensor(rng, {6}, false);
        auto build_sm = [&] { return sum(mul(softmax(x), coef)); };
        CHECK(oracle::grad_check(x, build_sm) < 1e-4);

        auto z = random_tensor(rng, {5});
        Tensor coef2 = random_tensor(rng, {5}, false);
        auto build_l2 = [&] { return sum(mul(l2_normalize(z), coef2)); };
        CHECK(oracle::grad_check(z, build_l2) < 1e-4);
    }
}

TEST_CASE("cross_entropy closed forms") {
    std::vector<double> uniform(20, 0.0);
    auto loss = cross_entropy(Tensor({20}, uniform), {0});
    CHECK(loss.value() == doctest::Approx(std::log(20.0)).epsilon(1e-9));

    // Target logit dominating -> loss toward 0.
    std::vector<double> dom(20, 0.0);
    dom[3] = 50.0;
    CHECK(cross_entropy(Tensor({20}, dom), {3}).value() < 1e-9);

    CHECK_THROWS_AS(cross_entropy(Tensor({4}, {0, 0, 0, 0}), {4}), ValidationError);
}

TEST_CASE("cross_entropy gradient") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto logits = random_tensor(rng, {4, 6});
        std::vector<std::size_t> targets;
        for (int i = 0; i < 4; ++i) targets.push_back(rng.below(6));
        auto build = [&] { return cross_entropy(logits, targets); };
        CHECK(oracle::grad_check(logits, build) < 1e-4);
    }
}

TEST_CASE("binary_cross_entropy closed forms") {
    CHECK(binary_cross_entropy(Tensor({1}, {0.0}), {1.0}).value() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
    // Saturated logits matching targets -> ~0.
    CHECK(binary_cross_entropy(Tensor({2}, {40.0, -40.0}), {1.0, 0.0}).value() < 1e-9);
}

TEST_CASE("binary_cross_entropy gradient") {
    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        auto logits = random_tensor(rng, {9});
        std::vector<double> targets;
        for (int i = 0; i < 9; ++i) targets.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
        auto build = [&] { return binary_cross_entropy(logits, targets); };
        CHECK(oracle::grad_check(logits, build) < 1e-4);
    }
}

TEST_CASE("emd_loss worked example and symmetry") {
    // Delta at bucket 1 vs delta at bucket 2, B=10.
    std::vector<double> d1(10, 0.0), d2(10, 0.0);
    d1[0] = 1.0;
    d2[1] = 1.0;
    Tensor a({10}, d1), b({10}, d2);
    CHECK(emd_loss(a, b, 1.0).value() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(emd_loss(a, b, 2.0).value() == doctest::Approx(std::sqrt(0.1)).epsilon(1e-12));
    CHECK(emd_loss(a, a, 2.0).value() == doctest::Approx(0.0));
    CHECK(emd_loss(b, a, 1.0).value() == doctest::Approx(emd_loss(a, b, 1.0).value()));
}

TEST_CASE("emd_loss validation") {
    Tensor a({3}, {0.5, 0.25, 0.25});
    Tensor bad({3}, {0.9, 0.3, 0.3});
    CHECK_THROWS_AS(emd_loss(a, bad, 2.0), ValidationError);
    Tensor b4({4}, {0.25, 0.25, 0.25, 0.25});
    CHECK_THROWS_AS(emd_loss(a, b4, 2.0), DimensionError);
}

TEST_CASE("emd_loss matches two-loop oracle") {
    Rng rng(23);
    for (int trial = 0; trial < 1000; ++trial) {
        auto p = oracle::random_distribution(rng, 8);
        auto q = oracle::random_distribution(rng, 8);
        Tensor tp({8}, p), tq({8}, q);
        for (double r : {1.0, 2.0}) {
            CHECK(std::abs(emd_loss(tp, tq, r).value() - oracle::emd_two_loop(p, q, r)) < 1e-12);
        }
        CHECK(emd_loss(tp, tq, 1.0).value() >= 0.0);
    }
}

TEST_CASE("emd_loss gradient") {
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        // Parameterize the prediction through softmax so perturbed inputs
        // stay normalized.
        auto logits = random_tensor(rng, {6});
        auto q = oracle::random_distribution(rng, 6);
        Tensor tq({6}, q);
        for (double r : {1.0, 2.0}) {
            auto build = [&] { return emd_loss(softmax(logits), tq, r); };
            CHECK(oracle::grad_check(logits, build) < 1e-4);
        }
    }
}

TEST_CASE("relu and reshape gradients through composition") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor(rng, {8});
        Tensor coef = random_tensor(rng, {2, 4}, false);
        auto build = [&] { return sum(mul(reshape(relu(x), {2, 4}), coef)); };
        CHECK(oracle::grad_check(x, build) < 1e-4);
    }
}

TEST_CASE("adam single step with unit gradient") {
    Tensor p({3}, {1.0, 1.0, 1.0}, true);
    Adam opt({{"p", p}}, AdamConfig{});
    // Seed a gradient of exactly 1 everywhere via a sum loss.
    auto loss = sum(p);
    loss.backward();
    opt.step();
    // With g=1: m_hat = v_hat = 1, delta = -lr / (1 + eps) ~ -0.001.
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(p.at(i) == doctest::Approx(1.0 - 0.001).epsilon(1e-6));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    Tensor p({2}, {0.5, -0.5}, true);
    Adam opt({{"p", p}}, AdamConfig{});
    p.zero_grad();
    opt.step();
    CHECK(p.at(0) == 0.5);
    CHECK(p.at(1) == -0.5);
}

TEST_CASE("adam step decay schedule") {
    Tensor p({1}, {0.0}, true);
    AdamConfig cfg;
    cfg.lr = 1e-4;
    cfg.decay_every = 20;
    cfg.decay_factor = 0.1;
    Adam opt({{"p", p}}, cfg);
    for (std::size_t epoch = 0; epoch < 41; ++epoch) {
        opt.apply_decay(epoch);
        if (epoch < 20) CHECK(opt.lr() == doctest::Approx(1e-4));
        else if (epoch < 40) CHECK(opt.lr() == doctest::Approx(1e-5));
        else CHECK(opt.lr() == doctest::Approx(1e-6));
    }
}

TEST_CASE("adam aborts on NaN gradient with diagnostics") {
    Tensor p({1}, {0.0}, true);
    Adam opt({{"trunk.W", p}}, AdamConfig{});
    p.zero_grad();
    p.node()->grad[0] = std::nan("");
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("trunk.W"), NumericError);
}

TEST_CASE("gradient accumulates across shared subexpressions") {
    // y = x*x + x  ->  dy/dx = 2x + 1
    Tensor x({1}, {3.0}, true);
    auto y = add(mul(x, x), x);
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("dropout: identity at rate 0, mask scaling preserves mean") {
    Rng rng(37);
    Tensor x({1000}, std::vector<double>(1000, 1.0), true);
    auto y = dropout(x, 0.25, rng);
    double total = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) total += y.at(i);
    CHECK(total / 1000.0 == doctest::Approx(1.0).epsilon(0.1));
    Rng rng2(37);
    CHECK(dropout(x, 0.0, rng2).node() == x.node());
}
