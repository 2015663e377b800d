#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "aesthnet/metrics.hpp"
#include "aesthnet/pipeline.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace aesthnet;

namespace {

json json_from_dict(const py::dict& d) {
    auto dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(d).cast<std::string>());
}

// Merge defaults <- overrides and hand the resolved pair to a command.
template <typename Fn>
auto with_config(const py::dict& overrides, Fn fn) {
    json cfg = default_config_json();
    merge_config(cfg, json_from_dict(overrides));
    return fn(config_from_json(cfg), cfg);
}

py::dict report_to_dict(const MetricsReport& r) {
    py::dict d;
    d["accuracy"] = r.accuracy;
    d["srocc"] = r.srocc;
    d["plcc"] = r.plcc;
    d["mae"] = r.mae;
    d["rmse"] = r.rmse;
    d["emd_r1"] = r.emd_r1;
    d["n"] = r.n;
    return d;
}

}  // namespace

PYBIND11_MODULE(_aesthnet, m) {
    m.doc() = "Attribute-conditioned aesthetic assessment core";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def(
        "mlsp_pool",
        [](const std::vector<std::tuple<std::size_t, std::size_t, std::size_t,
                                        std::vector<double>>>& maps,
           const std::string& image_id) {
            ActivationSet a;
            a.image_id = image_id;
            for (const auto& [h, w, c, data] : maps) a.maps.push_back({h, w, c, data});
            return mlsp_pool(a).values;
        },
        py::arg("maps"), py::arg("image_id") = "",
        "Global-average-pool (h, w, c, flat_values) maps and concatenate");

    m.def(
        "emd",
        [](const std::vector<double>& p, const std::vector<double>& q, double r,
           bool squared) {
            return emd_loss(Tensor({p.size()}, p), Tensor({q.size()}, q), r, squared).value();
        },
        py::arg("p"), py::arg("q"), py::arg("r") = 2.0, py::arg("squared") = false);

    m.def("fractional_ranks", &fractional_ranks, py::arg("values"));
    m.def("srocc", &srocc, py::arg("pred"), py::arg("truth"));
    m.def("plcc", &plcc, py::arg("pred"), py::arg("truth"));
    m.def("mae", &mae, py::arg("pred"), py::arg("truth"));
    m.def("rmse", &rmse, py::arg("pred"), py::arg("truth"));

    m.def(
        "gen_synthetic",
        [](const py::dict& overrides) {
            return with_config(overrides, [](const RunConfig& cfg, const json&) {
                SyntheticConfig sc = cfg.synth;
                sc.seed = cfg.seed;
                auto data = gen_synthetic(sc);
                py::dict out;
                py::list ids, embs, styles, comps, probs;
                for (const auto& e : data.embeddings) {
                    ids.append(e.id);
                    embs.append(e.values);
                }
                for (const auto& a : data.attributes) {
                    styles.append(a.style ? py::cast(*a.style) : py::none());
                    comps.append(a.composition ? py::cast(*a.composition) : py::none());
                }
                for (const auto& d : data.distributions) probs.append(d.probs);
                out["ids"] = ids;
                out["embeddings"] = embs;
                out["styles"] = styles;
                out["compositions"] = comps;
                out["distributions"] = probs;
                out["gap"] = data.info.gap;
                out["planted_means"] = data.info.planted_means;
                return out;
            });
        },
        py::arg("config") = py::dict(),
        "Planted-attribute synthetic dataset as plain lists");

    m.def("default_config",
          [] {
              auto loads = py::module_::import("json").attr("loads");
              return loads(default_config_json().dump());
          });

    auto bind_command = [&m](const char* name, auto fn, const char* doc) {
        m.def(
            name,
            [fn](const py::dict& config) {
                return with_config(config,
                                   [fn](const RunConfig& cfg, const json& resolved) {
                                       return fn(cfg, resolved);
                                   });
            },
            py::arg("config"), doc);
    };
    bind_command("train_attributes",
                 [](const RunConfig& c, const json& j) {
                     run_train_attributes(c, j);
                     return py::object(py::none());
                 },
                 "Stage-1 attribute training (file-based)");
    bind_command("train_aesthetic",
                 [](const RunConfig& c, const json& j) {
                     run_train_aesthetic(c, j);
                     return py::object(py::none());
                 },
                 "Stage-2 aesthetic training (file-based)");
    bind_command("evaluate",
                 [](const RunConfig& c, const json& j) {
                     return py::object(report_to_dict(run_evaluate(c, j)));
                 },
                 "Evaluate a model or the baseline; returns the metric report");
    bind_command("predict",
                 [](const RunConfig& c, const json& j) {
                     run_predict(c, j);
                     return py::object(py::none());
                 },
                 "Write per-image predictions CSV");
    bind_command("gen_synth",
                 [](const RunConfig& c, const json& j) {
                     run_gen_synth(c, j);
                     return py::object(py::none());
                 },
                 "Write a synthetic dataset to out_dir");
    bind_command("export_weights",
                 [](const RunConfig& c, const json& j) {
                     run_export_weights(c, j);
                     return py::object(py::none());
                 },
                 "Export generated predictor weights CSV");
}
