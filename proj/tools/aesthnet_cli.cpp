#include <deque>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aesthnet/pipeline.hpp"

using aesthnet::RunConfig;
using nlohmann::json;

namespace {

struct FlagSlot {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
};

struct Command {
    std::string name;
    std::string help;
    std::function<void(const RunConfig&, const json&)> run;
    std::string config_path;
    std::deque<FlagSlot> slots;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Attribute-conditioned aesthetic assessment toolkit"};
    app.require_subcommand(1);

    const json defaults = aesthnet::default_config_json();
    const auto keys = aesthnet::config_keys(defaults);

    std::deque<Command> commands;
    auto add_command = [&](const std::string& name, const std::string& help,
                           std::function<void(const RunConfig&, const json&)> run) {
        commands.push_back({name, help, std::move(run), "", {}});
        Command& c = commands.back();
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", c.config_path, "JSON config file");
        for (const auto& key : keys) {
            c.slots.push_back({key, "", nullptr});
            FlagSlot& slot = c.slots.back();
            std::string flag = "--" + key;
            if (key == "out_dir") flag += ",--out";
            slot.opt = sub->add_option(flag, slot.value, "config override");
        }
        sub->callback([&c, &defaults]() {
            json cfg = defaults;
            if (!c.config_path.empty())
                aesthnet::merge_config(cfg, aesthnet::load_config_file(c.config_path));
            for (const auto& slot : c.slots)
                if (slot.opt->count()) aesthnet::apply_cli_override(cfg, slot.key, slot.value);
            c.run(aesthnet::config_from_json(cfg), cfg);
        });
    };

    add_command("train-attributes", "Stage 1: multi-task attribute training",
                [](const RunConfig& c, const json& j) { aesthnet::run_train_attributes(c, j); });
    add_command("train-aesthetic", "Stage 2: hypernetwork aesthetic training",
                [](const RunConfig& c, const json& j) { aesthnet::run_train_aesthetic(c, j); });
    add_command("evaluate", "Score a model (or the baseline) against ground truth",
                [](const RunConfig& c, const json& j) { aesthnet::run_evaluate(c, j); });
    add_command("predict", "Per-image distributions, scores and attribute tags",
                [](const RunConfig& c, const json& j) { aesthnet::run_predict(c, j); });
    add_command("gen-synth", "Generate a planted-attribute synthetic dataset",
                [](const RunConfig& c, const json& j) { aesthnet::run_gen_synth(c, j); });
    add_command("export-weights", "Dump generated per-image predictor weights",
                [](const RunConfig& c, const json& j) { aesthnet::run_export_weights(c, j); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const aesthnet::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const aesthnet::DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
