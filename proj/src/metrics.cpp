#include "aesthnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "aesthnet/ops.hpp"

namespace aesthnet {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* op, std::size_t min_len) {
    if (a != b)
        throw DimensionError(std::string(op) + ": length mismatch " + std::to_string(a) +
                             " vs " + std::to_string(b));
    if (a < min_len)
        throw ValidationError(std::string(op) + ": needs at least " + std::to_string(min_len) +
                              " samples, got " + std::to_string(a));
}

}  // namespace

std::vector<double> fractional_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double plcc(const std::vector<double>& pred, const std::vector<double>& truth) {
    require_aligned(pred.size(), truth.size(), "plcc", 2);
    const double n = static_cast<double>(pred.size());
    double mp = 0, mt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mp += pred[i];
        mt += truth[i];
    }
    mp /= n;
    mt /= n;
    double num = 0, dp = 0, dt = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        num += (pred[i] - mp) * (truth[i] - mt);
        dp += (pred[i] - mp) * (pred[i] - mp);
        dt += (truth[i] - mt) * (truth[i] - mt);
    }
    if (dp == 0.0 || dt == 0.0)
        throw ValidationError("plcc: correlation undefined for a constant input vector");
    return num / std::sqrt(dp * dt);
}

double srocc(const std::vector<double>& pred, const std::vector<double>& truth) {
    require_aligned(pred.size(), truth.size(), "srocc", 2);
    return plcc(fractional_ranks(pred), fractional_ranks(truth));
}

double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
    require_aligned(pred.size(), truth.size(), "mae", 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
    require_aligned(pred.size(), truth.size(), "rmse", 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

double accuracy(const std::vector<bool>& pred_cls, const std::vector<bool>& truth_cls) {
    require_aligned(pred_cls.size(), truth_cls.size(), "accuracy", 1);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred_cls.size(); ++i)
        if (pred_cls[i] == truth_cls[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred_cls.size());
}

double mean_score(const ScoreDistribution& q) {
    if (q.probs.size() != q.bucket_values.size())
        throw DimensionError("mean_score: " + std::to_string(q.probs.size()) +
                             " probabilities vs " + std::to_string(q.bucket_values.size()) +
                             " bucket values");
    double m = 0.0;
    for (std::size_t i = 0; i < q.probs.size(); ++i) m += q.probs[i] * q.bucket_values[i];
    return m;
}

bool classify_high(const ScoreDistribution& q, double threshold) {
    return mean_score(q) > threshold;
}

double emd_r1(const ScoreDistribution& a, const ScoreDistribution& b) {
    return emd_loss(Tensor({a.probs.size()}, a.probs), Tensor({b.probs.size()}, b.probs), 1.0)
        .value();
}

std::vector<ScoreDistribution> baseline_predict(
    const std::vector<ScoreDistribution>& train_distributions,
    const std::vector<std::string>& test_ids, std::uint64_t seed) {
    if (train_distributions.empty())
        throw ValidationError("baseline_predict: empty training set");
    double train_mean = 0.0;
    for (const auto& d : train_distributions) train_mean += mean_score(d);
    train_mean /= static_cast<double>(train_distributions.size());
    const auto& buckets = train_distributions.front().bucket_values;
    Rng rng = Rng(seed).fork("baseline");
    std::vector<ScoreDistribution> out;
    out.reserve(test_ids.size());
    for (const auto& id : test_ids) {
        // sigma uniform on (0, 0.5]
        const double sigma = 0.5 - rng.uniform() * 0.5;
        ScoreDistribution d;
        d.id = id;
        d.bucket_values = buckets;
        d.probs = discretized_gaussian(buckets, train_mean, sigma);
        out.push_back(std::move(d));
    }
    return out;
}

MetricsReport evaluate(const std::vector<ScoreDistribution>& preds,
                       const std::vector<ScoreDistribution>& truths, double threshold) {
    require_aligned(preds.size(), truths.size(), "evaluate", 2);
    std::vector<double> mu_pred, mu_truth;
    std::vector<bool> cls_pred, cls_truth;
    double emd_total = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        mu_pred.push_back(mean_score(preds[i]));
        mu_truth.push_back(mean_score(truths[i]));
        cls_pred.push_back(mu_pred.back() > threshold);
        cls_truth.push_back(mu_truth.back() > threshold);
        emd_total += emd_r1(preds[i], truths[i]);
    }
    MetricsReport r;
    r.n = preds.size();
    r.accuracy = accuracy(cls_pred, cls_truth);
    r.srocc = srocc(mu_pred, mu_truth);
    r.plcc = plcc(mu_pred, mu_truth);
    r.mae = mae(mu_pred, mu_truth);
    r.rmse = rmse(mu_pred, mu_truth);
    r.emd_r1 = emd_total / static_cast<double>(preds.size());
    return r;
}

std::map<std::string, MetricsReport> evaluate_by_attribute(
    const std::vector<ScoreDistribution>& preds, const std::vector<ScoreDistribution>& truths,
    const std::vector<std::string>& attr_keys, double threshold,
    std::vector<std::string>* skipped) {
    require_aligned(preds.size(), truths.size(), "evaluate_by_attribute", 2);
    require_aligned(preds.size(), attr_keys.size(), "evaluate_by_attribute", 2);
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < attr_keys.size(); ++i) groups[attr_keys[i]].push_back(i);
    std::map<std::string, MetricsReport> out;
    for (const auto& [key, rows] : groups) {
        if (rows.size() < 2) {
            if (skipped) skipped->push_back(key);
            continue;
        }
        std::vector<ScoreDistribution> gp, gt;
        for (auto r : rows) {
            gp.push_back(preds[r]);
            gt.push_back(truths[r]);
        }
        try {
            out[key] = evaluate(gp, gt, threshold);
        } catch (const ValidationError&) {
            // Degenerate group (constant means); skip with a warning entry.
            if (skipped) skipped->push_back(key);
        }
    }
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

void save_report_csv(const MetricsReport& r, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    f << "metric,value\n";
    f << "accuracy," << fmt(r.accuracy) << "\n";
    f << "srocc," << fmt(r.srocc) << "\n";
    f << "plcc," << fmt(r.plcc) << "\n";
    f << "mae," << fmt(r.mae) << "\n";
    f << "rmse," << fmt(r.rmse) << "\n";
    f << "emd_r1," << fmt(r.emd_r1) << "\n";
    f << "n," << r.n << "\n";
}

std::string format_report(const MetricsReport& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "%-10s %10s\n%-10s %10.4f\n%-10s %10.4f\n%-10s %10.4f\n%-10s %10.4f\n"
                  "%-10s %10.4f\n%-10s %10.4f\n%-10s %10zu\n",
                  "metric", "value", "accuracy", r.accuracy, "srocc", r.srocc, "plcc", r.plcc,
                  "mae", r.mae, "rmse", r.rmse, "emd_r1", r.emd_r1, "n", r.n);
    return buf;
}

void save_report_by_attribute_csv(const std::map<std::string, MetricsReport>& reports,
                                  const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open '" + path + "' for writing");
    f << "attribute,metric,value\n";
    for (const auto& [key, r] : reports) {
        f << key << ",accuracy," << fmt(r.accuracy) << "\n";
        f << key << ",srocc," << fmt(r.srocc) << "\n";
        f << key << ",plcc," << fmt(r.plcc) << "\n";
        f << key << ",mae," << fmt(r.mae) << "\n";
        f << key << ",rmse," << fmt(r.rmse) << "\n";
        f << key << ",emd_r1," << fmt(r.emd_r1) << "\n";
        f << key << ",n," << r.n << "\n";
    }
}

}  // namespace aesthnet
