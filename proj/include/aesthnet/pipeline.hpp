#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aesthnet/attribute_net.hpp"
#include "aesthnet/data.hpp"
#include "aesthnet/hyper.hpp"
#include "aesthnet/metrics.hpp"

namespace aesthnet {

// Resolved run configuration shared by all commands. Dims left at 0 are
// inferred from the input files where possible.
struct RunConfig {
    std::uint64_t seed = 0;

    std::size_t D = 0;
    std::size_t E = 512;
    std::size_t d = 64;
    std::vector<std::size_t> hidden_dims{512, 256, 256, 64};
    std::size_t B = 0;
    std::size_t K_v = 0;
    std::size_t K_c = 0;

    StageConfig stage1{1e-4, 20, 0.1, 60, 32, 0.05};
    double dropout = 0.25;
    MtlWeights mtl{1.0, 10.0};
    double comp_threshold = 0.5;

    StageConfig stage2{1e-5, 20, 0.1, 40, 32, 0.05};
    double emd_r = 2.0;
    std::string variant = "full";

    double threshold = 5.0;
    bool by_attribute = false;
    bool baseline = false;

    SyntheticConfig synth;

    std::string embeddings_path;
    std::string attributes_path;
    std::string scores_path;
    std::string train_scores_path;  // baseline train set; defaults to scores
    std::string attr_checkpoint;
    std::string model_checkpoint;
    std::size_t layer_index = 0;  // 0 = last predictor layer
    std::string out_dir = "out";
};

// Flattened-key JSON view of the defaults; every leaf key doubles as a CLI
// flag. Unknown keys or wrong leaf types are rejected.
nlohmann::json default_config_json();
nlohmann::json load_config_file(const std::string& path);
void merge_config(nlohmann::json& base, const nlohmann::json& overlay);
RunConfig config_from_json(const nlohmann::json& j);

// Dotted leaf keys of a config object ("stage1.lr", "dims.hidden", ...).
std::vector<std::string> config_keys(const nlohmann::json& j);
// Sets one leaf from flag text, parsed according to the leaf's default type;
// arrays take comma-separated values.
void apply_cli_override(nlohmann::json& cfg, const std::string& dotted_key,
                        const std::string& text);

// Each command validates inputs fully before creating anything under
// cfg.out_dir, then writes its artifacts plus `resolved_config.json`.
void run_train_attributes(const RunConfig& cfg, const nlohmann::json& resolved);
void run_train_aesthetic(const RunConfig& cfg, const nlohmann::json& resolved);
MetricsReport run_evaluate(const RunConfig& cfg, const nlohmann::json& resolved);
void run_predict(const RunConfig& cfg, const nlohmann::json& resolved);
void run_gen_synth(const RunConfig& cfg, const nlohmann::json& resolved);
void run_export_weights(const RunConfig& cfg, const nlohmann::json& resolved);

}  // namespace aesthnet
