// Python module `_tweetsift`: a thin layer over the C++ core. Labels cross
// the boundary as 0/1 ints; configs as JSON-compatible dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "tweetsift/cli.hpp"
#include "tweetsift/config.hpp"
#include "tweetsift/ensemble.hpp"
#include "tweetsift/error.hpp"
#include "tweetsift/metrics.hpp"
#include "tweetsift/pipeline.hpp"
#include "tweetsift/preprocess.hpp"

namespace py = pybind11;
using namespace tweetsift;

namespace {

std::vector<Label> to_labels(const std::vector<int>& v) {
    std::vector<Label> out;
    out.reserve(v.size());
    for (int x : v) {
        if (x != 0 && x != 1) throw DataError("labels must be 0 or 1");
        out.push_back(static_cast<Label>(x));
    }
    return out;
}

std::vector<int> to_ints(const std::vector<Label>& v) {
    std::vector<int> out;
    out.reserve(v.size());
    for (auto l : v) out.push_back(to_int(l));
    return out;
}

py::dict scores_dict(const PrfScores& s) {
    py::dict d;
    d["precision"] = s.precision;
    d["recall"] = s.recall;
    d["f1"] = s.f1;
    return d;
}

py::object json_to_py(const Json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Json py_to_json(const py::handle& obj) {
    return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

RunConfig make_config(const std::filesystem::path& path, const py::object& overrides) {
    auto cfg = RunConfig::load(path);
    if (overrides.is_none()) return cfg;
    auto j = cfg.to_json();
    j.merge_patch(py_to_json(overrides));
    // members re-derive their seeds when the base seed is overridden
    if (py::cast<py::dict>(overrides).contains("seed") && j.contains("members"))
        for (auto& m : j["members"]) m.erase("seed");
    return RunConfig::from_json(j, std::filesystem::absolute(path).parent_path());
}

}  // namespace

PYBIND11_MODULE(_tweetsift, m) {
    m.doc() = "Ensemble classifier for informative tweet identification";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<UsageError>(m, "UsageError", base);
    auto data = py::register_exception<DataError>(m, "DataError", base);
    py::register_exception<LeakageError>(m, "LeakageError", data);
    py::register_exception<NumericError>(m, "NumericError", base);

    m.def("preprocess", [](const std::string& text, const std::string& strategy) {
        return apply_strategy(parse_strategy(strategy), text);
    }, py::arg("text"), py::arg("strategy") = "P1");
    m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"));

    m.def("f1_from", &f1_from, py::arg("precision"), py::arg("recall"));
    m.def("confusion", [](const std::vector<int>& pred, const std::vector<int>& gold) {
        const auto cm = confusion(to_labels(pred), to_labels(gold));
        py::dict d;
        d["tp"] = cm.tp;
        d["fp"] = cm.fp;
        d["fn"] = cm.fn;
        d["tn"] = cm.tn;
        return d;
    }, py::arg("pred"), py::arg("gold"));
    m.def("prf", [](const std::vector<int>& pred, const std::vector<int>& gold) {
        return scores_dict(prf(confusion(to_labels(pred), to_labels(gold))));
    }, py::arg("pred"), py::arg("gold"));

    m.def("aggregate", [](const MemberProbs& probs, const std::string& mode, double cutoff) {
        AggregationRule rule{parse_aggregation(mode), cutoff};
        validate_rule(rule, probs.size());
        return to_ints(aggregate(probs, rule));
    }, py::arg("member_probs"), py::arg("mode") = "HARD_VOTE", py::arg("cutoff") = 4.0);

    m.def("pseudo_labels", [](const std::vector<std::pair<std::string, double>>& probs, double hi, double lo) {
        Dataset pool{"pool", {}};
        std::map<std::string, double> by_id;
        for (const auto& [id, p] : probs) {
            pool.examples.push_back({id, "", std::nullopt});
            by_id[id] = p;
        }
        std::vector<std::pair<std::string, int>> out;
        for (const auto& e : generate_pseudo_labels(by_id, pool, {hi, lo}))
            out.emplace_back(e.tweet.id, to_int(e.pseudo_label));
        return out;
    }, py::arg("probs"), py::arg("hi") = 0.9, py::arg("lo") = 0.1);

    m.def("load_config", [](const std::filesystem::path& path, const py::object& overrides) {
        return json_to_py(make_config(path, overrides).to_json());
    }, py::arg("path"), py::arg("overrides") = py::none());

    m.def("run_pipeline", [](const std::filesystem::path& path, const py::object& overrides, int jobs) {
        const auto cfg = make_config(path, overrides);
        RunSummary r;
        {
            py::gil_scoped_release release;
            r = run_pipeline(cfg, {jobs, nullptr});
        }
        py::dict d;
        d["output_dir"] = cfg.output_dir;
        d["augmented"] = r.augmented;
        d["pseudo_count"] = r.pseudo.size();
        d["optimal_epochs"] = r.optimal_epochs;
        d["base"] = scores_dict(r.base.dev_scores);
        d["final"] = scores_dict(r.final_stage.dev_scores);
        d["test_pred"] = to_ints(r.final_stage.test_pred);
        d["manifest"] = json_to_py(Json::parse(r.manifest_json));
        return d;
    }, py::arg("config"), py::arg("overrides") = py::none(), py::arg("jobs") = 1);

    m.def("cli", [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
            py::gil_scoped_release release;
            code = dispatch(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
    }, py::arg("args"), "Run a subcommand in-process; returns (exit_code, stdout, stderr).");
}
