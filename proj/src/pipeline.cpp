#include "aesthnet/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace aesthnet {

// --- configuration ----------------------------------------------------------

json default_config_json() {
    const RunConfig c;
    json j;
    j["seed"] = c.seed;
    j["dims"] = {{"D", c.D},     {"E", c.E},     {"d", c.d},    {"hidden", c.hidden_dims},
                 {"B", c.B},     {"K_v", c.K_v}, {"K_c", c.K_c}};
    auto stage = [](const StageConfig& s) {
        return json{{"lr", s.lr},
                    {"decay_every", s.decay_every},
                    {"decay_factor", s.decay_factor},
                    {"epochs", s.epochs},
                    {"batch_size", s.batch_size},
                    {"val_fraction", s.val_fraction}};
    };
    j["stage1"] = stage(c.stage1);
    j["stage2"] = stage(c.stage2);
    j["dropout"] = c.dropout;
    j["mtl"] = {{"a_v", c.mtl.a_v}, {"a_c", c.mtl.a_c}};
    j["comp_threshold"] = c.comp_threshold;
    j["emd_r"] = c.emd_r;
    j["variant"] = c.variant;
    j["threshold"] = c.threshold;
    j["by_attribute"] = c.by_attribute;
    j["baseline"] = c.baseline;
    j["synth"] = {{"n", 1000},
                  {"D", c.synth.D},
                  {"K_v", c.synth.K_v},
                  {"K_c", c.synth.K_c},
                  {"B", c.synth.B},
                  {"style_scale", c.synth.style_scale},
                  {"comp_scale", c.synth.comp_scale},
                  {"noise_std", c.synth.noise_std},
                  {"dist_std", c.synth.dist_std},
                  {"comp_bit_prob", c.synth.comp_bit_prob}};
    j["paths"] = {{"embeddings", ""},       {"attributes", ""},
                  {"scores", ""},           {"train_scores", ""},
                  {"attr_checkpoint", ""},  {"model_checkpoint", ""}};
    j["layer_index"] = c.layer_index;
    j["out_dir"] = c.out_dir;
    return j;
}

json load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open config file '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("config file '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config file '" + path + "': not a JSON object");
    return j;
}

void merge_config(json& base, const json& overlay) {
    for (const auto& [key, value] : overlay.items()) {
        if (!base.contains(key)) throw ValidationError("unknown config key '" + key + "'");
        json& slot = base[key];
        if (slot.is_object()) {
            if (!value.is_object())
                throw ValidationError("config key '" + key + "' must be an object");
            merge_config(slot, value);
            continue;
        }
        const bool ok = (slot.is_string() && value.is_string()) ||
                        (slot.is_boolean() && value.is_boolean()) ||
                        (slot.is_number() && value.is_number()) ||
                        (slot.is_array() && value.is_array());
        if (!ok)
            throw ValidationError("config key '" + key + "' has the wrong type (expected " +
                                  std::string(slot.type_name()) + ")");
        slot = value;
    }
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& dims = j.at("dims");
    c.D = dims.at("D").get<std::size_t>();
    c.E = dims.at("E").get<std::size_t>();
    c.d = dims.at("d").get<std::size_t>();
    c.hidden_dims = dims.at("hidden").get<std::vector<std::size_t>>();
    c.B = dims.at("B").get<std::size_t>();
    c.K_v = dims.at("K_v").get<std::size_t>();
    c.K_c = dims.at("K_c").get<std::size_t>();
    auto stage = [](const json& s) {
        StageConfig out;
        out.lr = s.at("lr").get<double>();
        out.decay_every = s.at("decay_every").get<std::size_t>();
        out.decay_factor = s.at("decay_factor").get<double>();
        out.epochs = s.at("epochs").get<std::size_t>();
        out.batch_size = s.at("batch_size").get<std::size_t>();
        out.val_fraction = s.at("val_fraction").get<double>();
        return out;
    };
    c.stage1 = stage(j.at("stage1"));
    c.stage2 = stage(j.at("stage2"));
    c.dropout = j.at("dropout").get<double>();
    c.mtl.a_v = j.at("mtl").at("a_v").get<double>();
    c.mtl.a_c = j.at("mtl").at("a_c").get<double>();
    c.comp_threshold = j.at("comp_threshold").get<double>();
    c.emd_r = j.at("emd_r").get<double>();
    c.variant = j.at("variant").get<std::string>();
    c.threshold = j.at("threshold").get<double>();
    c.by_attribute = j.at("by_attribute").get<bool>();
    c.baseline = j.at("baseline").get<bool>();
    const auto& sy = j.at("synth");
    c.synth.n = sy.at("n").get<std::size_t>();
    c.synth.D = sy.at("D").get<std::size_t>();
    c.synth.K_v = sy.at("K_v").get<std::size_t>();
    c.synth.K_c = sy.at("K_c").get<std::size_t>();
    c.synth.B = sy.at("B").get<std::size_t>();
    c.synth.style_scale = sy.at("style_scale").get<double>();
    c.synth.comp_scale = sy.at("comp_scale").get<double>();
    c.synth.noise_std = sy.at("noise_std").get<double>();
    c.synth.dist_std = sy.at("dist_std").get<double>();
    c.synth.comp_bit_prob = sy.at("comp_bit_prob").get<double>();
    const auto& p = j.at("paths");
    c.embeddings_path = p.at("embeddings").get<std::string>();
    c.attributes_path = p.at("attributes").get<std::string>();
    c.scores_path = p.at("scores").get<std::string>();
    c.train_scores_path = p.at("train_scores").get<std::string>();
    c.attr_checkpoint = p.at("attr_checkpoint").get<std::string>();
    c.model_checkpoint = p.at("model_checkpoint").get<std::string>();
    c.layer_index = j.at("layer_index").get<std::size_t>();
    c.out_dir = j.at("out_dir").get<std::string>();
    if (c.out_dir.empty()) throw ValidationError("out_dir must not be empty");
    parse_variant(c.variant);
    return c;
}

namespace {

void collect_keys(const json& j, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [key, value] : j.items()) {
        const std::string dotted = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object())
            collect_keys(value, dotted, out);
        else
            out.push_back(dotted);
    }
}

}  // namespace

std::vector<std::string> config_keys(const json& j) {
    std::vector<std::string> out;
    collect_keys(j, "", out);
    return out;
}

void apply_cli_override(json& cfg, const std::string& dotted_key, const std::string& text) {
    json* slot = &cfg;
    std::stringstream ss(dotted_key);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!slot->is_object() || !slot->contains(part))
            throw ValidationError("unknown config key '" + dotted_key + "'");
        slot = &(*slot)[part];
    }
    try {
        if (slot->is_string()) {
            *slot = text;
        } else if (slot->is_boolean()) {
            if (text == "true" || text == "1")
                *slot = true;
            else if (text == "false" || text == "0")
                *slot = false;
            else
                throw ValidationError("expected a boolean");
        } else if (slot->is_number_float()) {
            *slot = std::stod(text);
        } else if (slot->is_number()) {
            *slot = static_cast<std::uint64_t>(std::stoull(text));
        } else if (slot->is_array()) {
            std::vector<std::size_t> vals;
            std::stringstream vs(text);
            std::string item;
            while (std::getline(vs, item, ','))
                vals.push_back(static_cast<std::size_t>(std::stoull(item)));
            *slot = vals;
        } else {
            throw ValidationError("not an overridable leaf");
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw ValidationError("bad value '" + text + "' for config key '" + dotted_key + "'");
    }
}

// --- shared command plumbing ------------------------------------------------

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void require_path(const std::string& path, const std::string& what) {
    if (path.empty())
        throw ValidationError(what + " path not set (use --paths." + what + ")");
    if (!fs::exists(path))
        throw ValidationError(what + " file not found: " + path);
}

std::vector<EmbeddingVector> load_embeddings_any(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    char magic[4] = {};
    f.read(magic, 4);
    if (f.gcount() == 4 && std::string(magic, 4) == "MLSP") return load_embeddings_bin(path);
    return load_embeddings_csv(path);
}

void write_resolved_config(const json& resolved, const std::string& out_dir) {
    std::ofstream f(fs::path(out_dir) / "resolved_config.json", std::ios::binary);
    if (!f) throw ValidationError("cannot write resolved config under '" + out_dir + "'");
    f << resolved.dump(2) << "\n";
}

struct JoinedAttr {
    AttrDataset style_ds, comp_ds;
    std::size_t k_v = 0, k_c = 0;
};

JoinedAttr join_attributes(const std::vector<EmbeddingVector>& embs,
                           const std::vector<AttributeLabels>& labels) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < embs.size(); ++i) index[embs[i].id] = i;
    JoinedAttr out;
    for (const auto& lab : labels) {
        auto it = index.find(lab.id);
        if (it == index.end()) continue;
        if (lab.style) {
            out.style_ds.embeddings.push_back(embs[it->second]);
            out.style_ds.labels.push_back(lab);
            out.k_v = std::max(out.k_v, *lab.style + 1);
        }
        if (lab.composition) {
            out.comp_ds.embeddings.push_back(embs[it->second]);
            out.comp_ds.labels.push_back(lab);
            out.k_c = std::max(out.k_c, lab.composition->size());
        }
    }
    if (out.style_ds.embeddings.empty() && out.comp_ds.embeddings.empty())
        throw ValidationError("no attribute labels match the embedding ids");
    return out;
}

struct JoinedScores {
    std::vector<EmbeddingVector> embeddings;
    std::vector<ScoreDistribution> distributions;
};

JoinedScores join_scores(const std::vector<EmbeddingVector>& embs,
                         const std::vector<ScoreDistribution>& dists) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dists.size(); ++i) index[dists[i].id] = i;
    JoinedScores out;
    for (const auto& e : embs) {
        auto it = index.find(e.id);
        if (it == index.end()) continue;
        out.embeddings.push_back(e);
        out.distributions.push_back(dists[it->second]);
    }
    if (out.embeddings.empty())
        throw ValidationError("no score rows match the embedding ids");
    return out;
}

std::size_t check_dim(std::size_t configured, std::size_t observed, const char* what) {
    if (configured != 0 && configured != observed)
        throw DimensionError(std::string("configured ") + what + "=" +
                             std::to_string(configured) + " does not match data " + what + "=" +
                             std::to_string(observed));
    return observed;
}

AestheticModel load_model_for(const RunConfig& cfg) {
    require_path(cfg.model_checkpoint, "model_checkpoint");
    std::optional<AttributeNetParams> attr;
    if (!cfg.attr_checkpoint.empty()) {
        require_path(cfg.attr_checkpoint, "attr_checkpoint");
        attr = load_attr_checkpoint(cfg.attr_checkpoint);
    }
    return load_model_checkpoint(cfg.model_checkpoint, std::move(attr));
}

std::string comp_bits_string(const std::vector<std::uint8_t>& bits) {
    std::string s;
    for (auto b : bits) s += b ? '1' : '0';
    return s;
}

}  // namespace

// --- commands ---------------------------------------------------------------

void run_train_attributes(const RunConfig& cfg, const json& resolved) {
    require_path(cfg.embeddings_path, "embeddings");
    require_path(cfg.attributes_path, "attributes");
    auto embs = load_embeddings_any(cfg.embeddings_path);
    auto labels = load_attributes_csv(cfg.attributes_path);
    auto joined = join_attributes(embs, labels);

    AttrTrainConfig tc;
    tc.stage = cfg.stage1;
    tc.mtl = cfg.mtl;
    tc.dropout = cfg.dropout;
    tc.seed = cfg.seed;
    tc.E = cfg.E;
    tc.K_v = cfg.K_v ? cfg.K_v : joined.k_v;
    tc.K_c = cfg.K_c ? cfg.K_c : joined.k_c;
    tc.comp_threshold = cfg.comp_threshold;
    const auto kind = parse_variant(cfg.variant);
    tc.style_task = kind != VariantKind::comp_only;
    tc.comp_task = kind != VariantKind::style_only;

    std::clog << "train-attributes: " << joined.style_ds.embeddings.size() << " style / "
              << joined.comp_ds.embeddings.size() << " composition samples, E=" << tc.E
              << ", epochs=" << tc.stage.epochs << "\n";
    auto result = train_attribute_net(joined.style_ds, joined.comp_ds, tc);
    std::clog << "train-attributes: best epoch " << result.best_epoch << ", val metric "
              << (result.history.empty() ? 0.0 : result.history[result.best_epoch].val_metric)
              << "\n";

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    save_attr_checkpoint(result.params, (out / "attr_checkpoint.bin").string());
    save_history_csv(result.history, (out / "attr_history.csv").string());

    // Confusion of the selected model over the style training pool.
    std::ofstream cm(out / "style_confusion.csv", std::ios::binary);
    cm << "truth";
    for (std::size_t k = 0; k < result.params.K_v; ++k) cm << ",pred_" << k;
    cm << "\n";
    if (!joined.style_ds.embeddings.empty() && tc.style_task) {
        std::vector<std::size_t> preds, truths;
        for (std::size_t i = 0; i < joined.style_ds.embeddings.size(); ++i) {
            preds.push_back(predict_attributes(joined.style_ds.embeddings[i].values,
                                               result.params, cfg.comp_threshold)
                                .style);
            truths.push_back(*joined.style_ds.labels[i].style);
        }
        auto conf = style_confusion(preds, truths, result.params.K_v);
        for (std::size_t t = 0; t < conf.size(); ++t) {
            cm << t;
            for (auto n : conf[t]) cm << "," << n;
            cm << "\n";
        }
    }
    cm.close();
    write_resolved_config(resolved, cfg.out_dir);
}

void run_train_aesthetic(const RunConfig& cfg, const json& resolved) {
    require_path(cfg.embeddings_path, "embeddings");
    require_path(cfg.scores_path, "scores");
    auto embs = load_embeddings_any(cfg.embeddings_path);
    auto scores = load_scores_csv(cfg.scores_path);
    auto joined = join_scores(embs, scores);

    const auto kind = parse_variant(cfg.variant);
    std::optional<AttributeNetParams> attr;
    if (variant_uses_attr(kind)) {
        require_path(cfg.attr_checkpoint, "attr_checkpoint");
        attr = load_attr_checkpoint(cfg.attr_checkpoint);
        if (cfg.E != 0 && attr->E != cfg.E)
            throw DimensionError("attribute checkpoint E=" + std::to_string(attr->E) +
                                 " does not match configured E=" + std::to_string(cfg.E));
    }

    const std::size_t D =
        check_dim(cfg.D, joined.embeddings.front().values.size(), "D");
    const std::size_t B = check_dim(cfg.B, joined.distributions.front().buckets(), "B");
    AestheticNetSpec spec;
    spec.layer_dims.push_back(D);
    for (auto h : cfg.hidden_dims) spec.layer_dims.push_back(h);
    spec.layer_dims.push_back(B);

    auto model =
        build_variant(kind, spec, cfg.d, std::move(attr), Rng(cfg.seed).fork("model"));
    HyperTrainConfig tc;
    tc.stage = cfg.stage2;
    tc.seed = cfg.seed;
    tc.emd_r = cfg.emd_r;

    std::clog << "train-aesthetic: variant " << cfg.variant << ", n="
              << joined.embeddings.size() << ", dims " << shape_str(spec.layer_dims)
              << ", epochs=" << tc.stage.epochs << "\n";
    AesDataset ds{std::move(joined.embeddings), std::move(joined.distributions)};
    auto result = train_hyper(ds, std::move(model), tc);
    if (!result.history.empty())
        std::clog << "train-aesthetic: best epoch " << result.best_epoch << ", val SROCC "
                  << result.history[result.best_epoch].val_srocc << "\n";

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    save_model_checkpoint(result.model, (out / "model_checkpoint.bin").string());
    save_aes_history_csv(result.history, (out / "aes_history.csv").string());
    write_resolved_config(resolved, cfg.out_dir);
}

MetricsReport run_evaluate(const RunConfig& cfg, const json& resolved) {
    require_path(cfg.embeddings_path, "embeddings");
    require_path(cfg.scores_path, "scores");
    auto embs = load_embeddings_any(cfg.embeddings_path);
    auto scores = load_scores_csv(cfg.scores_path);
    auto joined = join_scores(embs, scores);

    std::vector<ScoreDistribution> preds;
    std::optional<AestheticModel> model;
    if (cfg.baseline) {
        const std::string train_path =
            cfg.train_scores_path.empty() ? cfg.scores_path : cfg.train_scores_path;
        require_path(train_path, "train_scores");
        auto train = load_scores_csv(train_path);
        std::vector<std::string> ids;
        for (const auto& e : joined.embeddings) ids.push_back(e.id);
        preds = baseline_predict(train, ids, cfg.seed);
    } else {
        model = load_model_for(cfg);
        for (std::size_t i = 0; i < joined.embeddings.size(); ++i) {
            auto probs = model->predict(joined.embeddings[i].values);
            preds.push_back({joined.embeddings[i].id, std::move(probs),
                             joined.distributions[i].bucket_values});
        }
    }

    std::optional<AttributeNetParams> attr_for_groups;
    if (cfg.by_attribute) {
        if (model && model->attr)
            attr_for_groups = model->attr->clone();
        else {
            require_path(cfg.attr_checkpoint, "attr_checkpoint");
            attr_for_groups = load_attr_checkpoint(cfg.attr_checkpoint);
        }
    }

    auto report = evaluate(preds, joined.distributions, cfg.threshold);
    std::clog << format_report(report);

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    save_report_csv(report, (out / "report.csv").string());
    {
        std::ofstream f(out / "report.txt", std::ios::binary);
        f << format_report(report);
    }
    if (cfg.by_attribute) {
        std::vector<std::string> keys;
        for (const auto& e : joined.embeddings) {
            auto pa = predict_attributes(e.values, *attr_for_groups, cfg.comp_threshold);
            keys.push_back("style_" + std::to_string(pa.style));
        }
        std::vector<std::string> skipped;
        auto by = evaluate_by_attribute(preds, joined.distributions, keys, cfg.threshold,
                                        &skipped);
        for (const auto& s : skipped)
            std::clog << "evaluate: skipped group '" << s << "' (too few or degenerate)\n";
        save_report_by_attribute_csv(by, (out / "report_by_attribute.csv").string());
    }
    write_resolved_config(resolved, cfg.out_dir);
    return report;
}

void run_predict(const RunConfig& cfg, const json& resolved) {
    require_path(cfg.embeddings_path, "embeddings");
    auto embs = load_embeddings_any(cfg.embeddings_path);
    auto model = load_model_for(cfg);
    const std::size_t B = model.spec.B();
    const auto buckets = default_bucket_values(B);
    const bool has_attr = model.attr.has_value();

    fs::create_directories(cfg.out_dir);
    std::ofstream f(fs::path(cfg.out_dir) / "predictions.csv", std::ios::binary);
    f << "id";
    for (std::size_t k = 1; k <= B; ++k) f << ",q" << k;
    f << ",mean,high,style,comp\n";
    for (const auto& e : embs) {
        auto probs = model.predict(e.values);
        ScoreDistribution d{e.id, probs, buckets};
        f << e.id;
        for (double p : probs) f << "," << fmt(p);
        f << "," << fmt(mean_score(d)) << "," << (classify_high(d, cfg.threshold) ? 1 : 0);
        if (has_attr) {
            auto pa = predict_attributes(e.values, *model.attr, cfg.comp_threshold);
            f << "," << pa.style << "," << comp_bits_string(pa.composition);
        } else {
            f << ",,";
        }
        f << "\n";
    }
    f.close();
    write_resolved_config(resolved, cfg.out_dir);
    std::clog << "predict: wrote " << embs.size() << " rows\n";
}

void run_gen_synth(const RunConfig& cfg, const json& resolved) {
    SyntheticConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    if (sc.n == 0) throw ValidationError("synth.n must be positive");
    auto data = gen_synthetic(sc);

    fs::create_directories(cfg.out_dir);
    const fs::path out(cfg.out_dir);
    store_embeddings_csv(data.embeddings, (out / "embeddings.csv").string());
    store_attributes_csv(data.attributes, sc.K_c, (out / "attributes.csv").string());
    store_scores_csv(data.distributions, (out / "scores.csv").string());
    {
        json info;
        info["gap"] = data.info.gap;
        info["mean_lo"] = data.info.mean_lo;
        info["mean_hi"] = data.info.mean_hi;
        info["planted_means"] = data.info.planted_means;
        std::ofstream f(out / "synth_info.json", std::ios::binary);
        f << info.dump(2) << "\n";
    }
    write_resolved_config(resolved, cfg.out_dir);
    std::clog << "gen-synth: wrote " << data.embeddings.size() << " samples to "
              << cfg.out_dir << "\n";
}

void run_export_weights(const RunConfig& cfg, const json& resolved) {
    require_path(cfg.embeddings_path, "embeddings");
    auto embs = load_embeddings_any(cfg.embeddings_path);
    auto model = load_model_for(cfg);
    const std::size_t layer = cfg.layer_index ? cfg.layer_index : model.spec.M();

    fs::create_directories(cfg.out_dir);
    export_generated_weights(model, embs,
                             layer, (fs::path(cfg.out_dir) / "weights.csv").string());
    write_resolved_config(resolved, cfg.out_dir);
    std::clog << "export-weights: layer " << layer << ", " << embs.size() << " rows\n";
}

}  // namespace aesthnet
