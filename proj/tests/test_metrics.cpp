#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "aesthnet/metrics.hpp"
#include "oracles.hpp"

using namespace aesthnet;

TEST_CASE("fractional ranks: hand examples and tie averaging") {
    CHECK(fractional_ranks({10, 20, 30}) == std::vector<double>{1, 2, 3});
    CHECK(fractional_ranks({30, 10, 20}) == std::vector<double>{3, 1, 2});
    // Two-way and three-way ties take the average of the occupied positions.
    CHECK(fractional_ranks({5, 5, 1}) == std::vector<double>{2.5, 2.5, 1});
    CHECK(fractional_ranks({2, 2, 2, 9}) == std::vector<double>{2, 2, 2, 4});
}

TEST_CASE("fractional ranks agree with the quadratic oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(50);
        // Duplicates on purpose: draw from a small grid half the time.
        for (auto& x : v)
            x = rng.bernoulli(0.5) ? static_cast<double>(rng.below(8)) : rng.normal(0.0, 1.0);
        auto fast = fractional_ranks(v);
        auto slow = oracle::ranks_quadratic(v);
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(std::abs(fast[i] - slow[i]) < 1e-9);
    }
}

TEST_CASE("srocc agrees with the quadratic oracle and hits the endpoints") {
    Rng rng(103);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(50), b(50);
        for (auto& x : a) x = rng.normal(0.0, 1.0);
        for (auto& x : b) x = rng.normal(0.0, 1.0);
        CHECK(std::abs(srocc(a, b) - oracle::srocc_quadratic(a, b)) < 1e-9);
    }
    std::vector<double> up{1, 2, 5, 9}, down{4, 3, 2, 1};
    CHECK(srocc(up, up) == doctest::Approx(1.0));
    CHECK(srocc(up, down) == doctest::Approx(-1.0));
    // Monotone but nonlinear transforms leave srocc at exactly 1.
    std::vector<double> cubed;
    for (double x : up) cubed.push_back(x * x * x);
    CHECK(srocc(up, cubed) == doctest::Approx(1.0));
}

TEST_CASE("plcc: affine invariance and error cases") {
    Rng rng(107);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(30), b(30);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.normal(0.0, 2.0);
            b[i] = 3.0 * a[i] - 7.0;
        }
        CHECK(plcc(a, b) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(plcc(a, b) - oracle::pearson_naive(a, b)) < 1e-12);
        for (auto& x : b) x = -x;
        CHECK(plcc(a, b) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(plcc({1, 1, 1}, {1, 2, 3}), ValidationError);
    CHECK_THROWS_AS(plcc({1, 2}, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(srocc({4, 4, 4}, {1, 2, 3}), ValidationError);
}

TEST_CASE("mae / rmse hand values and ordering property") {
    std::vector<double> p{1, 2, 3}, t{2, 2, 1};
    CHECK(mae(p, t) == doctest::Approx(1.0));
    CHECK(rmse(p, t) == doctest::Approx(std::sqrt(5.0 / 3.0)));

    Rng rng(109);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(20), b(20);
        for (auto& x : a) x = rng.normal(0.0, 3.0);
        for (auto& x : b) x = rng.normal(0.0, 3.0);
        CHECK(rmse(a, b) >= mae(a, b) - 1e-12);
    }
}

TEST_CASE("accuracy counts matching labels") {
    CHECK(accuracy({true, false, true, true}, {true, true, true, false}) == doctest::Approx(0.5));
    CHECK(accuracy({false}, {false}) == doctest::Approx(1.0));
}

TEST_CASE("emd_r1 between distributions matches the two-loop oracle") {
    Rng rng(113);
    auto buckets = default_bucket_values(10);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = oracle::random_distribution(rng, 10);
        auto q = oracle::random_distribution(rng, 10);
        ScoreDistribution dp{"p", p, buckets}, dq{"q", q, buckets};
        CHECK(std::abs(emd_r1(dp, dq) - oracle::emd_two_loop(p, q, 1.0)) < 1e-12);
        CHECK(emd_r1(dp, dp) == doctest::Approx(0.0));
    }
}

TEST_CASE("baseline_predict: structure, determinism, sigma range") {
    auto buckets = default_bucket_values(10);
    std::vector<ScoreDistribution> train;
    Rng rng(127);
    for (int i = 0; i < 40; ++i)
        train.push_back({"t" + std::to_string(i), oracle::random_distribution(rng, 10), buckets});
    double train_mean = 0.0;
    for (const auto& d : train) train_mean += mean_score(d);
    train_mean /= 40.0;

    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    auto preds = baseline_predict(train, ids, 5);
    REQUIRE(preds.size() == 5);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        CHECK(preds[i].id == ids[i]);
        double total = 0.0;
        for (double v : preds[i].probs) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        // All predictions share the same center but not the same spread.
        CHECK(mean_score(preds[i]) == doctest::Approx(train_mean).epsilon(0.05));
    }
    bool any_diff = false;
    for (std::size_t i = 1; i < preds.size(); ++i)
        if (preds[i].probs != preds[0].probs) any_diff = true;
    CHECK(any_diff);

    auto again = baseline_predict(train, ids, 5);
    for (std::size_t i = 0; i < preds.size(); ++i) CHECK(again[i].probs == preds[i].probs);
    auto other = baseline_predict(train, ids, 6);
    CHECK(other[0].probs != preds[0].probs);
}

TEST_CASE("evaluate on identical predictions is perfect") {
    auto buckets = default_bucket_values(10);
    Rng rng(131);
    std::vector<ScoreDistribution> truths;
    for (int i = 0; i < 25; ++i)
        truths.push_back({"i" + std::to_string(i), oracle::random_distribution(rng, 10), buckets});
    auto r = evaluate(truths, truths, 5.0);
    CHECK(r.n == 25);
    CHECK(r.accuracy == doctest::Approx(1.0));
    CHECK(r.srocc == doctest::Approx(1.0));
    CHECK(r.plcc == doctest::Approx(1.0));
    CHECK(r.mae == doctest::Approx(0.0));
    CHECK(r.rmse == doctest::Approx(0.0));
    CHECK(r.emd_r1 == doctest::Approx(0.0));
}

TEST_CASE("evaluate accuracy threshold is strict") {
    std::vector<double> b{4.0, 6.0};
    // Means: pred 5.0 (at threshold -> low), truth 5.5 (high).
    ScoreDistribution p{"x", {0.5, 0.5}, b};
    ScoreDistribution t{"x", {0.25, 0.75}, b};
    ScoreDistribution p2{"y", {0.9, 0.1}, b};
    ScoreDistribution t2{"y", {0.8, 0.2}, b};
    auto r = evaluate({p, p2}, {t, t2}, 5.0);
    CHECK(r.accuracy == doctest::Approx(0.5));
}

TEST_CASE("evaluate_by_attribute partitions and skips degenerate groups") {
    auto buckets = default_bucket_values(5);
    Rng rng(137);
    std::vector<ScoreDistribution> preds, truths;
    std::vector<std::string> keys;
    for (int i = 0; i < 30; ++i) {
        preds.push_back({"i" + std::to_string(i), oracle::random_distribution(rng, 5), buckets});
        truths.push_back({"i" + std::to_string(i), oracle::random_distribution(rng, 5), buckets});
        keys.push_back(i % 2 == 0 ? "even" : "odd");
    }
    // A singleton group and a constant-mean group both get skipped.
    preds.push_back({"solo", oracle::random_distribution(rng, 5), buckets});
    truths.push_back({"solo", oracle::random_distribution(rng, 5), buckets});
    keys.push_back("single");
    for (int i = 0; i < 3; ++i) {
        preds.push_back({"c" + std::to_string(i), {1, 0, 0, 0, 0}, buckets});
        truths.push_back({"c" + std::to_string(i), {0, 0, 0, 0, 1}, buckets});
        keys.push_back("const");
    }

    std::vector<std::string> skipped;
    auto by = evaluate_by_attribute(preds, truths, keys, 3.0, &skipped);
    REQUIRE(by.count("even") == 1);
    REQUIRE(by.count("odd") == 1);
    CHECK(by.count("single") == 0);
    CHECK(by.count("const") == 0);
    CHECK(skipped == std::vector<std::string>{"const", "single"});
    CHECK(by["even"].n == 15);
    CHECK(by["odd"].n == 15);

    // Group metrics equal standalone evaluation of the same rows.
    std::vector<ScoreDistribution> ep, et;
    for (int i = 0; i < 30; i += 2) {
        ep.push_back(preds[i]);
        et.push_back(truths[i]);
    }
    auto direct = evaluate(ep, et, 3.0);
    CHECK(by["even"].srocc == doctest::Approx(direct.srocc));
    CHECK(by["even"].emd_r1 == doctest::Approx(direct.emd_r1));
}

TEST_CASE("report serialization") {
    namespace fs = std::filesystem;
    MetricsReport r{0.75, 0.5, 0.625, 0.25, 0.3125, 0.0625, 16};
    auto dir = fs::temp_directory_path() / ("metrics_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    auto path = (dir / "report.csv").string();
    save_report_csv(r, path);
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    CHECK(line == "metric,value");
    std::getline(f, line);
    CHECK(line == "accuracy,0.75");
    std::getline(f, line);
    CHECK(line == "srocc,0.5");

    auto text = format_report(r);
    CHECK(text.find("srocc") != std::string::npos);
    CHECK(text.find("0.5000") != std::string::npos);

    std::map<std::string, MetricsReport> by{{"g", r}};
    auto bpath = (dir / "by_attr.csv").string();
    save_report_by_attribute_csv(by, bpath);
    std::ifstream bf(bpath);
    std::getline(bf, line);
    CHECK(line == "attribute,metric,value");
    std::getline(bf, line);
    CHECK(line == "g,accuracy,0.75");
    fs::remove_all(dir);
}
