#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aesthnet/data.hpp"

namespace aesthnet {

struct MetricsReport {
    double accuracy = 0.0;
    double srocc = 0.0;
    double plcc = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    double emd_r1 = 0.0;
    std::size_t n = 0;
};

// Fractional (average-tie) ranks.
std::vector<double> fractional_ranks(const std::vector<double>& v);

// Spearman rank-order correlation; throws on constant inputs.
double srocc(const std::vector<double>& pred, const std::vector<double>& truth);

// Pearson linear correlation; throws on constant inputs.
double plcc(const std::vector<double>& pred, const std::vector<double>& truth);

double mae(const std::vector<double>& pred, const std::vector<double>& truth);
double rmse(const std::vector<double>& pred, const std::vector<double>& truth);

// Fraction of matching high/low labels.
double accuracy(const std::vector<bool>& pred_cls, const std::vector<bool>& truth_cls);

double mean_score(const ScoreDistribution& q);

// high iff mean score strictly above T.
bool classify_high(const ScoreDistribution& q, double threshold);

// EMD with r=1 on detached values (same computation as the training loss).
double emd_r1(const ScoreDistribution& a, const ScoreDistribution& b);

// Dummy predictor: per test image, a Gaussian centered on the training-set
// mean score with sigma ~ Uniform(0, 0.5], discretized onto the buckets.
std::vector<ScoreDistribution> baseline_predict(
    const std::vector<ScoreDistribution>& train_distributions,
    const std::vector<std::string>& test_ids, std::uint64_t seed);

MetricsReport evaluate(const std::vector<ScoreDistribution>& preds,
                       const std::vector<ScoreDistribution>& truths, double threshold);

// Groups test items by predicted attribute key before evaluating; groups with
// fewer than 2 items are skipped (recorded in `skipped`).
std::map<std::string, MetricsReport> evaluate_by_attribute(
    const std::vector<ScoreDistribution>& preds, const std::vector<ScoreDistribution>& truths,
    const std::vector<std::string>& attr_keys, double threshold,
    std::vector<std::string>* skipped = nullptr);

// `metric,value` CSV plus aligned-column text rendering.
void save_report_csv(const MetricsReport& r, const std::string& path);
std::string format_report(const MetricsReport& r);
void save_report_by_attribute_csv(const std::map<std::string, MetricsReport>& reports,
                                  const std::string& path);

}  // namespace aesthnet
