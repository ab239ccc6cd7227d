#include "tweetsift/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "tweetsift/checkpoint.hpp"
#include "tweetsift/error.hpp"
#include "tweetsift/pipeline.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config, train, dev, test, out;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr_scale;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "Run configuration JSON");
    cmd->add_option("--train", f.train, "Labelled training TSV");
    cmd->add_option("--dev", f.dev, "Labelled dev TSV");
    cmd->add_option("--test", f.test, "Unlabelled pool TSV");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seed", f.seed, "Base seed");
    cmd->add_option("--lr-scale", f.lr_scale, "Learning-rate multiplier");
    cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

// Flags override the JSON file; flag paths are relative to the working
// directory, JSON paths to the config file.
RunConfig resolve_config(const CommonFlags& f) {
    Json j = Json::object();
    fs::path base;
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw DataError("cannot open config: " + f.config);
        try {
            j = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config " + f.config + ": " + e.what());
        }
        base = fs::path(f.config).parent_path();
    }
    auto path_flag = [&](const std::string& v, const char* key) {
        if (!v.empty()) j[key] = fs::absolute(v).string();
    };
    path_flag(f.train, "train");
    path_flag(f.dev, "dev");
    path_flag(f.test, "test");
    path_flag(f.out, "output_dir");
    if (f.seed) j["seed"] = *f.seed;
    if (f.lr_scale) j["lr_scale"] = *f.lr_scale;
    return RunConfig::from_json(j, base);
}

std::vector<MemberConfig> select_members(const RunConfig& cfg, const std::vector<std::string>& names) {
    auto all = cfg.effective_members();
    if (names.empty()) return all;
    std::vector<MemberConfig> out;
    for (const auto& n : names) {
        auto it = std::find_if(all.begin(), all.end(), [&](const MemberConfig& m) { return m.name == n; });
        if (it == all.end()) throw UsageError("unknown member: " + n);
        out.push_back(*it);
    }
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + p.string());
    out << text << '\n';
}

std::vector<PseudoExample> load_pseudo(const std::string& path) {
    std::vector<PseudoExample> out;
    if (path.empty()) return out;
    // An empty pseudo set is a header-only file without a label column.
    {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open pseudo-label file: " + path);
        std::string line;
        std::size_t rows = 0;
        while (std::getline(in, line)) rows += !line.empty();
        if (rows == 1) return out;
    }
    const auto ds = load_tsv(path, LabelColumn::Detect);
    for (const auto& e : ds.examples) {
        if (!e.label) throw DataError(path + ": pseudo example '" + e.id + "' has no label");
        out.push_back({e, *e.label, 0.0, true});
    }
    return out;
}

// Member probability files must list the same ids in the same order.
MemberProbs load_member_probs(const std::vector<std::string>& paths, std::vector<std::string>& ids) {
    MemberProbs probs;
    for (const auto& p : paths) {
        const auto rows = load_probabilities(p);
        std::vector<std::string> these;
        std::vector<double> values;
        for (const auto& r : rows) {
            these.push_back(r.id);
            values.push_back(r.prob);
        }
        if (probs.empty()) ids = these;
        else if (these != ids) throw DataError(p + ": ids differ from " + paths.front());
        probs.push_back(std::move(values));
    }
    return probs;
}

std::vector<Label> gold_for(const std::vector<std::string>& ids, const std::string& gold_path) {
    const auto gold = load_tsv(gold_path, LabelColumn::Required);
    std::map<std::string, Label> by_id;
    for (const auto& e : gold.examples) by_id[e.id] = *e.label;
    std::vector<Label> out;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError(gold_path + ": no gold label for id " + id);
        out.push_back(it->second);
    }
    if (out.size() != by_id.size()) throw DataError(gold_path + ": gold has ids missing from the predictions");
    return out;
}

AggregationRule make_rule(const std::string& rule, double cutoff) {
    AggregationRule r;
    r.mode = parse_aggregation(rule);
    r.cutoff = cutoff;
    return r;
}

int run(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CommonFlags common;

    auto* prep = app.add_subcommand("prep", "Load corpora and build vocabularies");
    add_common(prep, common);

    std::vector<std::string> member_names;
    std::string pseudo_path;
    auto* cv = app.add_subcommand("cv", "Stratified k-fold CV per member");
    add_common(cv, common);
    cv->add_option("--member", member_names, "Restrict to these members");
    cv->add_option("--pseudo", pseudo_path, "Pseudo-labelled TSV added to every training fold");

    bool epochs_from_cv = false;
    std::optional<int> epochs;
    auto* train = app.add_subcommand("train", "Train members on train (plus pseudo) data");
    add_common(train, common);
    train->add_option("--member", member_names, "Restrict to these members");
    train->add_option("--pseudo", pseudo_path, "Pseudo-labelled TSV appended to the training data");
    train->add_flag("--epochs-from-cv", epochs_from_cv, "Use optimal epochs from <out>/cv");
    train->add_option("--epochs", epochs, "Epoch count for every member");

    std::vector<std::string> prob_paths;
    std::string unlabeled, out_path, audit_path;
    double hi = 0.9, lo = 0.1;
    auto* pseudo = app.add_subcommand("pseudo", "Pseudo-label a pool from member probabilities");
    pseudo->add_option("--probs", prob_paths, "Member probability TSVs (soft mean)")->required();
    pseudo->add_option("--unlabeled", unlabeled, "Unlabelled pool TSV")->required();
    pseudo->add_option("--hi", hi, "Positive threshold");
    pseudo->add_option("--lo", lo, "Negative threshold");
    pseudo->add_option("--out", out_path, "Output TSV")->required();
    pseudo->add_option("--audit", audit_path, "Audit JSON");

    std::string model_path, input_path;
    auto* predict_cmd = app.add_subcommand("predict", "Score a TSV with a checkpoint");
    predict_cmd->add_option("--model", model_path, "Checkpoint")->required();
    predict_cmd->add_option("--input", input_path, "TSV to score")->required();
    predict_cmd->add_option("--out", out_path, "Probability TSV")->required();

    std::string rule = "hard", gold_path, train_path;
    double cutoff = 4.0;
    bool tune = false;
    auto* ens = app.add_subcommand("ensemble", "Aggregate member probabilities");
    ens->add_option("--probs", prob_paths, "Member probability TSVs")->required();
    ens->add_option("--rule", rule, "hard or soft");
    ens->add_option("--cutoff", cutoff, "Vote count or probability-sum cutoff");
    ens->add_flag("--tune", tune, "Choose the cutoff on --gold");
    ens->add_option("--gold", gold_path, "Gold TSV for tuning");
    ens->add_option("--train", train_path, "Training TSV for the tie-break ratio");
    ens->add_option("--out", out_path, "Prediction TSV")->required();
    ens->add_option("--audit", audit_path, "Audit JSON");

    std::string pred_path;
    auto* eval = app.add_subcommand("eval", "Score predictions against gold labels");
    eval->add_option("--pred", pred_path, "Prediction TSV")->required();
    eval->add_option("--gold", gold_path, "Gold TSV")->required();
    eval->add_option("--train", train_path, "Training TSV for the distribution report");
    eval->add_option("--out", out_path, "Metrics JSON");

    std::vector<std::string> without_paths, with_paths;
    std::string text_path;
    auto* ablate = app.add_subcommand("ablate", "Per-member and ensemble scores with and without augmentation");
    ablate->add_option("--without", without_paths, "Probability TSVs without augmentation")->required();
    ablate->add_option("--with", with_paths, "Probability TSVs with augmentation")->required();
    ablate->add_option("--gold", gold_path, "Gold TSV")->required();
    ablate->add_option("--rule", rule, "hard or soft");
    ablate->add_option("--cutoff", cutoff, "Cutoff");
    ablate->add_option("--out", out_path, "Report JSON");
    ablate->add_option("--text", text_path, "Report text table");

    auto* run_cmd = app.add_subcommand("run", "Full pipeline");
    add_common(run_cmd, common);

    app.require_subcommand(1);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 1;
    }

    if (prep->parsed()) {
        const auto cfg = resolve_config(common);
        const auto data = load_corpora(cfg, !cfg.dev.empty(), false);
        const auto vocabs = build_vocabs(cfg, data.train, data.test);
        const fs::path o = cfg.output_dir;
        fs::create_directories(o / "vocab");
        for (const auto& [s, v] : vocabs) v.save(o / "vocab" / vocab_file_name(s));
        nlohmann::ordered_json j;
        j["config"] = cfg.to_json();
        const std::pair<const char*, const Dataset*> roles[] = {
            {"train", &data.train}, {"dev", &data.dev}, {"test", &data.test}};
        for (const auto& [role, ds] : roles) {
            if (ds->empty()) continue;
            auto& e = j["datasets"][role];
            e["path"] = ds->name;
            e["size"] = ds->size();
            if (ds->fully_labeled()) {
                const auto d = class_distribution(*ds);
                e["positives"] = d.positives;
                e["negatives"] = d.negatives;
                e["positive_ratio"] = d.positive_ratio;
            }
        }
        for (const auto& [s, v] : vocabs) j["vocab_sizes"][std::string(strategy_name(s))] = v.size();
        write_file(o / "prep.json", j.dump(2));
        out << j.dump(2) << '\n';
        return 0;
    }
    if (cv->parsed()) {
        const auto cfg = resolve_config(common);
        const auto data = load_corpora(cfg, false, false);
        const auto vocabs = build_vocabs(cfg, data.train, data.test);
        const auto members = select_members(cfg, member_names);
        const auto extra = load_pseudo(pseudo_path);
        std::vector<CvReport> reports(members.size());
        const auto fold_seed = derive_seed(cfg.seed, {fnv1a("folds")});
        parallel_for(members.size(), common.jobs, [&](std::size_t i) {
            reports[i] = cross_validate(members[i], vocabs.at(members[i].preproc), data.train, cfg.cv.k, extra,
                                        fold_seed, 1);
        });
        const fs::path dir = fs::path(cfg.output_dir) / (extra.empty() ? "cv" : "cv_pseudo");
        for (const auto& r : reports) {
            write_file(dir / (r.member + ".json"), cv_report_json(r));
            out << r.member << "\toptimal_epoch=" << r.optimal_epoch << "\tmean_f1=" << r.mean_f1[r.optimal_epoch - 1]
                << '\n';
        }
        return 0;
    }
    if (train->parsed()) {
        const auto cfg = resolve_config(common);
        const auto data = load_corpora(cfg, !cfg.dev.empty(), false);
        const auto vocabs = build_vocabs(cfg, data.train, data.test);
        auto members = select_members(cfg, member_names);
        const auto extra = load_pseudo(pseudo_path);
        const fs::path o = cfg.output_dir;
        std::vector<int> ep;
        for (auto& m : members) {
            int e = m.epochs;
            if (epochs) e = *epochs;
            else if (epochs_from_cv) {
                const auto p = o / "cv" / (m.name + ".json");
                std::ifstream in(p);
                if (!in) throw DataError("missing CV report: " + p.string());
                e = Json::parse(in).at("optimal_epoch").get<int>();
            }
            ep.push_back(e);
        }
        const auto trained = augment_and_train_final(members, vocabs, ep, data.train, extra, {}, common.jobs);
        const std::string stage = pseudo_path.empty() ? "base" : "final";
        fs::create_directories(o / "models" / stage);
        for (const auto& tm : trained.members) {
            const auto& c = tm.config;
            const auto path = o / "models" / stage / (c.name + ".ckpt.json");
            save_checkpoint(path, {c, tm.params, vocabs.at(c.preproc), "vocab/" + vocab_file_name(c.preproc)});
            for (const auto* ds : {&data.dev, &data.test}) {
                if (ds->empty() || (ds == &data.dev && cfg.dev.empty())) continue;
                const auto p = predict(tm.params, *ds, vocabs.at(c.preproc), c.preproc, c.max_len);
                std::vector<ProbabilityRow> rows;
                for (std::size_t i = 0; i < ds->size(); ++i) rows.push_back({ds->examples[i].id, p[i]});
                fs::create_directories(o / "probs" / stage);
                save_probabilities(o / "probs" / stage / (c.name + (ds == &data.dev ? ".dev.tsv" : ".test.tsv")), rows);
            }
            out << path.string() << '\n';
        }
        return 0;
    }
    if (pseudo->parsed()) {
        std::vector<std::string> ids;
        const auto probs = load_member_probs(prob_paths, ids);
        const auto pool = load_tsv(unlabeled, LabelColumn::Detect);
        std::map<std::string, double> meta;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            double s = 0.0;
            for (const auto& p : probs) s += p[i];
            meta[ids[i]] = s / static_cast<double>(probs.size());
        }
        const PseudoThresholds t{hi, lo};
        if (!(t.lo >= 0.0 && t.lo < t.hi && t.hi <= 1.0)) throw UsageError("thresholds need 0 <= lo < hi <= 1");
        const auto ex = generate_pseudo_labels(meta, pool, t);
        save_tsv(out_path, pseudo_as_dataset(ex));
        if (!audit_path.empty()) write_file(audit_path, pseudo_audit_json(ex, t));
        out << "pseudo-labelled " << ex.size() << " of " << pool.size() << '\n';
        return 0;
    }
    if (predict_cmd->parsed()) {
        const auto ckpt = load_checkpoint(model_path);
        const auto ds = load_tsv(input_path, LabelColumn::Detect);
        const auto& c = ckpt.config;
        const auto p = predict(ckpt.params, ds, ckpt.vocab, c.preproc, c.max_len);
        std::vector<ProbabilityRow> rows;
        for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back({ds.examples[i].id, p[i]});
        save_probabilities(out_path, rows);
        return 0;
    }
    if (ens->parsed()) {
        std::vector<std::string> ids;
        const auto probs = load_member_probs(prob_paths, ids);
        auto r = make_rule(rule, cutoff);
        std::optional<CutoffTuning> tuning;
        if (tune) {
            if (gold_path.empty()) throw UsageError("--tune requires --gold");
            double ratio = 0.5;
            if (!train_path.empty())
                ratio = class_distribution(load_tsv(train_path, LabelColumn::Required)).positive_ratio;
            tuning = tune_cutoff(probs, gold_for(ids, gold_path), r.mode, ratio);
            r.cutoff = tuning->cutoff;
        } else {
            validate_rule(r, probs.size());
        }
        const auto labels = aggregate(probs, r);
        std::vector<Prediction> preds;
        for (std::size_t i = 0; i < ids.size(); ++i) preds.push_back({ids[i], labels[i]});
        save_predictions(out_path, preds);
        std::vector<std::string> names;
        for (const auto& p : prob_paths) names.push_back(fs::path(p).stem().string());
        if (!audit_path.empty())
            write_file(audit_path, ensemble_audit_json(names, ids, probs, r, tuning ? &*tuning : nullptr));
        return 0;
    }
    if (eval->parsed()) {
        const auto preds = load_predictions(pred_path);
        std::vector<std::string> ids;
        std::vector<Label> labels;
        for (const auto& p : preds) {
            ids.push_back(p.id);
            labels.push_back(p.label);
        }
        const auto gold = gold_for(ids, gold_path);
        const auto cm = confusion(labels, gold);
        std::string j;
        if (!train_path.empty()) {
            const auto dist = distribution_report(load_tsv(train_path, LabelColumn::Required), labels);
            j = metrics_json(cm, &dist);
        } else {
            j = metrics_json(cm);
        }
        if (!out_path.empty()) write_file(out_path, j);
        out << j << '\n';
        return 0;
    }
    if (ablate->parsed()) {
        if (without_paths.size() != with_paths.size()) throw UsageError("--without and --with need the same count");
        std::vector<std::string> ids_a, ids_b;
        const auto a = load_member_probs(without_paths, ids_a);
        const auto b = load_member_probs(with_paths, ids_b);
        if (ids_a != ids_b) throw DataError("--without and --with files cover different ids");
        std::vector<std::string> names;
        for (const auto& p : without_paths) {
            auto n = fs::path(p).stem().string();
            names.push_back(n.substr(0, n.find('.')));
        }
        const auto r = make_rule(rule, cutoff);
        validate_rule(r, a.size());
        const auto report = ablation_report(names, a, b, gold_for(ids_a, gold_path), r);
        if (!out_path.empty()) write_file(out_path, report.to_json());
        if (!text_path.empty()) write_file(text_path, report.to_text());
        out << report.to_text();
        return 0;
    }
    if (run_cmd->parsed()) {
        const auto cfg = resolve_config(common);
        const auto s = run_pipeline(cfg, {common.jobs, &err});
        out << "base  dev P/R/F1 " << round4(s.base.dev_scores.precision) << ' ' << round4(s.base.dev_scores.recall)
            << ' ' << round4(s.base.dev_scores.f1) << '\n';
        out << "final dev P/R/F1 " << round4(s.final_stage.dev_scores.precision) << ' '
            << round4(s.final_stage.dev_scores.recall) << ' ' << round4(s.final_stage.dev_scores.f1) << '\n';
        return 0;
    }
    return 1;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Informativeness classifier for short posts", "tweetsift"};
    try {
        return run(app, args, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace tweetsift
