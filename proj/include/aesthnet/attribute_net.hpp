#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aesthnet/data.hpp"
#include "aesthnet/ops.hpp"
#include "aesthnet/optim.hpp"

namespace aesthnet {

// Per-epoch learning-rate schedule shared by both training stages.
struct StageConfig {
    double lr = 1e-4;
    std::size_t decay_every = 20;
    double decay_factor = 0.1;
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    double val_fraction = 0.05;
};

struct MtlWeights {
    double a_v = 1.0;
    double a_c = 10.0;
};

// Trunk + two heads: e_s = ReLU(W_s^T e_b + b_s), style/composition logits
// affine on e_s.
struct AttributeNetParams {
    std::size_t D = 0, E = 0, K_v = 0, K_c = 0;
    Tensor W_s, b_s;  // D -> E
    Tensor W_v, b_v;  // E -> K_v
    Tensor W_c, b_c;  // E -> K_c

    std::vector<NamedParam> named_params();
    AttributeNetParams clone() const;
};

AttributeNetParams init_attribute_net(std::size_t D, std::size_t E, std::size_t K_v,
                                      std::size_t K_c, Rng rng);

struct AttrForwardOut {
    Tensor e_s;
    Tensor style_logits;
    Tensor comp_logits;
};

// x: [D] or [n, D]. Dropout (training only) sits between e_s and the heads;
// the e_s returned is pre-dropout.
AttrForwardOut attr_forward(const Tensor& x, AttributeNetParams& p, double dropout_rate = 0.0,
                            Rng* dropout_rng = nullptr);

// One mixed multi-task batch. Either side may be absent (undefined tensor).
struct AttrBatch {
    Tensor style_inputs;                   // [n_v, D]
    std::vector<std::size_t> style_targets;
    Tensor comp_inputs;                    // [n_c, D]
    std::vector<double> comp_targets;      // flattened multi-hot, n_c * K_c
};

Tensor mtl_loss(const AttrBatch& batch, AttributeNetParams& p, MtlWeights w,
                double dropout_rate = 0.0, Rng* dropout_rng = nullptr);

struct AttributePrediction {
    std::size_t style = 0;
    std::vector<std::uint8_t> composition;
};

AttributePrediction predict_attributes(const std::vector<double>& e_b, AttributeNetParams& p,
                                       double comp_threshold = 0.5);

// At-least-one-match rule; an empty predicted set never matches.
double composition_accuracy(const std::vector<std::vector<std::uint8_t>>& preds,
                            const std::vector<std::vector<std::uint8_t>>& truths);

double style_accuracy(const std::vector<std::size_t>& preds,
                      const std::vector<std::size_t>& truths);

// Row-per-truth-class style confusion matrix.
std::vector<std::vector<std::size_t>> style_confusion(const std::vector<std::size_t>& preds,
                                                      const std::vector<std::size_t>& truths,
                                                      std::size_t k);

// Aligned embeddings + labels; ids must correspond index-wise.
struct AttrDataset {
    std::vector<EmbeddingVector> embeddings;
    std::vector<AttributeLabels> labels;
};

struct AttrTrainConfig {
    StageConfig stage;
    MtlWeights mtl;
    double dropout = 0.25;
    std::uint64_t seed = 0;
    std::size_t E = 512;
    std::size_t K_v = 0, K_c = 0;  // 0 = infer from labels
    bool style_task = true;
    bool comp_task = true;
    double comp_threshold = 0.5;
};

struct EpochRow {
    std::size_t epoch = 0;
    double loss = 0.0;
    double style_acc = 0.0;
    double comp_acc = 0.0;
    double val_metric = 0.0;
};

struct AttrTrainResult {
    AttributeNetParams params;  // best-validation checkpoint
    std::vector<EpochRow> history;
    std::size_t best_epoch = 0;
};

// Stage-1 training: balanced dual-dataset stream, MTL objective, model
// selection on the mean of validation style and composition accuracies.
AttrTrainResult train_attribute_net(const AttrDataset& style_ds, const AttrDataset& comp_ds,
                                    const AttrTrainConfig& cfg);

void save_history_csv(const std::vector<EpochRow>& history, const std::string& path);

// Versioned binary checkpoint (magic "ATTR", float32 blobs).
void save_attr_checkpoint(const AttributeNetParams& p, const std::string& path);
AttributeNetParams load_attr_checkpoint(const std::string& path);

}  // namespace aesthnet
