#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aesthnet/attribute_net.hpp"
#include "aesthnet/data.hpp"
#include "aesthnet/ops.hpp"

namespace aesthnet {

// Layer widths of the per-image predictor, endpoints included: [D, ..., B].
struct AestheticNetSpec {
    std::vector<std::size_t> layer_dims;

    std::size_t D() const { return layer_dims.front(); }
    std::size_t B() const { return layer_dims.back(); }
    std::size_t M() const { return layer_dims.size() - 1; }

    static AestheticNetSpec defaults(std::size_t D = 1264, std::size_t B = 10) {
        return {{D, 512, 256, 256, 64, B}};
    }
    void validate() const;
};

// One generator block: reducer E -> d, then weight head d -> N_in*N_out and
// bias head d -> N_out for the corresponding predictor layer.
struct HyperBlock {
    Tensor W_r, b_r;
    Tensor W_w, b_w;
    Tensor W_b, b_b;
};

struct HyperNetParams {
    AestheticNetSpec spec;
    std::size_t E = 512;
    std::size_t d = 64;
    std::vector<HyperBlock> blocks;

    std::vector<NamedParam> named_params();
    HyperNetParams clone() const;
    std::size_t param_count() const;
};

HyperNetParams init_hyper_net(const AestheticNetSpec& spec, std::size_t E, std::size_t d,
                              Rng rng);

// Per-image weight/bias set for all M predictor layers, on the tape.
using GeneratedParams = std::vector<std::pair<Tensor, Tensor>>;

// l2-normalizes e_s once, then runs every block. Gradients flow to the
// hyper parameters only (pass e_s as a constant tensor).
GeneratedParams hyper_generate(const Tensor& e_s, HyperNetParams& hp);

// ReLU chain over generated layers, affine final layer, softmax output.
Tensor aesthetic_forward(const Tensor& e_b, const GeneratedParams& gp);

// --- model variants ---------------------------------------------------------

enum class VariantKind { full, attr_linear, mlp_only, style_only, comp_only };

VariantKind parse_variant(const std::string& name);
std::string variant_name(VariantKind kind);

// Whether stage-2 runs the hypernetwork route for this variant.
bool variant_uses_hyper(VariantKind kind);
bool variant_uses_attr(VariantKind kind);

// A stage-2 model with a uniform predict/train surface across variants.
struct AestheticModel {
    VariantKind kind = VariantKind::full;
    AestheticNetSpec spec;
    std::optional<AttributeNetParams> attr;  // frozen in stage 2
    std::optional<HyperNetParams> hyper;
    Tensor W_lin, b_lin;                          // attr_linear head E -> B
    std::vector<std::pair<Tensor, Tensor>> mlp;   // mlp_only learned layers

    // Attribute trunk output for one embedding (no dropout, post-ReLU).
    std::vector<double> trunk_embedding(const std::vector<double>& e_b);

    // Distribution tensor on the tape; pass the precomputed trunk embedding
    // for hyper/linear variants to skip recomputing the frozen stage.
    Tensor forward(const std::vector<double>& e_b_values,
                   const std::vector<double>* e_s_values = nullptr);

    std::vector<double> predict(const std::vector<double>& e_b);

    std::vector<NamedParam> trainable_params();
    std::size_t trainable_param_count();
    AestheticModel clone() const;
};

// Assembles a variant. `attr` is required for variants that condition on the
// attribute embedding and must already be trained for meaningful use.
AestheticModel build_variant(VariantKind kind, const AestheticNetSpec& spec, std::size_t d,
                             std::optional<AttributeNetParams> attr, Rng rng);

// --- stage-2 training -------------------------------------------------------

struct AesDataset {
    std::vector<EmbeddingVector> embeddings;
    std::vector<ScoreDistribution> distributions;
};

struct HyperTrainConfig {
    StageConfig stage{1e-5, 20, 0.1, 40, 32, 0.05};
    std::uint64_t seed = 0;
    double emd_r = 2.0;
    bool emd_squared = false;
};

struct AesEpochRow {
    std::size_t epoch = 0;
    double loss = 0.0;
    double val_srocc = 0.0;
};

struct HyperTrainResult {
    AestheticModel model;  // best-validation-SROCC checkpoint
    std::vector<AesEpochRow> history;
    std::size_t best_epoch = 0;
};

// Optimizes only the model's trainable parameters (the attribute net stays
// frozen); per-sample EMD loss, model selection on validation SROCC.
HyperTrainResult train_hyper(const AesDataset& ds, AestheticModel model,
                             const HyperTrainConfig& cfg);

void save_aes_history_csv(const std::vector<AesEpochRow>& history, const std::string& path);

// Versioned binary checkpoint (magic "HYPR", float32 blobs).
void save_model_checkpoint(const AestheticModel& m, const std::string& path);
// `attr` supplies the frozen attribute net for variants that need it.
AestheticModel load_model_checkpoint(const std::string& path,
                                     std::optional<AttributeNetParams> attr);

// CSV of the flattened generated weight matrix of one predictor layer
// (1-based layer index) per input embedding.
void export_generated_weights(AestheticModel& model,
                              const std::vector<EmbeddingVector>& embeddings,
                              std::size_t layer_index, const std::string& path);

}  // namespace aesthnet
