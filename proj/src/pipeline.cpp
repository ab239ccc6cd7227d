#include "tweetsift/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "tweetsift/checkpoint.hpp"
#include "tweetsift/error.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

namespace fs = std::filesystem;

namespace {

class Logger {
public:
    explicit Logger(std::ostream* out) : out_(out), start_(std::chrono::steady_clock::now()) {}
    void operator()(const std::string& msg) const {
        if (!out_) return;
        const auto s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        *out_ << "[" << std::fixed << std::setprecision(1) << s << "s] " << msg << '\n' << std::flush;
    }

private:
    std::ostream* out_;
    std::chrono::steady_clock::time_point start_;
};

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

std::vector<ProbabilityRow> prob_rows(const Dataset& ds, const std::vector<double>& p) {
    std::vector<ProbabilityRow> rows;
    rows.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back({ds.examples[i].id, p[i]});
    return rows;
}

std::vector<Prediction> pred_rows(const Dataset& ds, const std::vector<Label>& labels) {
    std::vector<Prediction> rows;
    rows.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) rows.push_back({ds.examples[i].id, labels[i]});
    return rows;
}

std::vector<std::string> ids_of(const Dataset& ds) {
    std::vector<std::string> ids;
    for (const auto& e : ds.examples) ids.push_back(e.id);
    return ids;
}

std::vector<std::string> names_of(const std::vector<MemberConfig>& members) {
    std::vector<std::string> names;
    for (const auto& m : members) names.push_back(m.name);
    return names;
}

// Final stages are tuned on dev when requested; the dev/test predictions and
// aggregation audit are written under out/<stage>.
StageResult finish_stage(const std::string& stage, std::vector<TrainedMember> members, const Corpora& data,
                         const std::map<PreprocStrategy, Vocab>& vocabs, const RunConfig& cfg, int jobs,
                         const fs::path& out, bool write_files) {
    StageResult r;
    r.members = std::move(members);
    r.dev_probs = predict_members(r.members, vocabs, data.dev, jobs);
    if (!data.test.empty()) r.test_probs = predict_members(r.members, vocabs, data.test, jobs);

    const auto gold = data.dev.labels();
    r.rule = cfg.aggregation.rule;
    std::optional<CutoffTuning> tuning;
    if (cfg.aggregation.tune) {
        tuning = tune_cutoff(r.dev_probs, gold, r.rule.mode, class_distribution(data.train).positive_ratio);
        r.rule.cutoff = tuning->cutoff;
    }
    r.dev_pred = aggregate(r.dev_probs, r.rule);
    if (!data.test.empty()) r.test_pred = aggregate(r.test_probs, r.rule);
    r.dev_confusion = confusion(r.dev_pred, gold);
    r.dev_scores = prf(r.dev_confusion);
    if (!write_files) return r;

    std::vector<std::string> names;
    for (const auto& m : r.members) names.push_back(m.config.name);
    for (std::size_t m = 0; m < r.members.size(); ++m) {
        const auto& tm = r.members[m];
        fs::create_directories(out / "models" / stage);
        save_checkpoint(out / "models" / stage / (tm.config.name + ".ckpt.json"),
                        {tm.config, tm.params, vocabs.at(tm.config.preproc), "vocab/" + vocab_file_name(tm.config.preproc)});
        fs::create_directories(out / "probs" / stage);
        save_probabilities(out / "probs" / stage / (tm.config.name + ".dev.tsv"), prob_rows(data.dev, r.dev_probs[m]));
        if (!data.test.empty())
            save_probabilities(out / "probs" / stage / (tm.config.name + ".test.tsv"),
                               prob_rows(data.test, r.test_probs[m]));
        nlohmann::ordered_json hist = nlohmann::ordered_json::array();
        for (const auto& h : tm.history) {
            nlohmann::ordered_json e{{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"adv_loss", h.adv_loss}};
            if (h.dev_f1) e["dev_f1"] = *h.dev_f1;
            hist.push_back(e);
        }
        write_text(out / "models" / stage / (tm.config.name + ".history.json"), hist.dump(2));
    }
    fs::create_directories(out / "ensemble");
    save_predictions(out / "ensemble" / (stage + ".dev.tsv"), pred_rows(data.dev, r.dev_pred));
    write_text(out / "ensemble" / (stage + ".dev.audit.json"),
               ensemble_audit_json(names, ids_of(data.dev), r.dev_probs, r.rule, tuning ? &*tuning : nullptr));
    if (!data.test.empty()) {
        save_predictions(out / "ensemble" / (stage + ".test.tsv"), pred_rows(data.test, r.test_pred));
        write_text(out / "ensemble" / (stage + ".test.audit.json"),
                   ensemble_audit_json(names, ids_of(data.test), r.test_probs, r.rule, tuning ? &*tuning : nullptr));
    }
    const auto dist = distribution_report(data.train, r.dev_pred);
    write_text(out / "metrics" / (stage + ".dev.json"), metrics_json(r.dev_confusion, &dist));
    return r;
}

std::vector<TrainedMember> train_all(const std::vector<MemberConfig>& members,
                                     const std::map<PreprocStrategy, Vocab>& vocabs, const std::vector<int>& epochs,
                                     const Dataset& train, int jobs) {
    std::vector<TrainedMember> out(members.size());
    parallel_for(members.size(), jobs, [&](std::size_t i) {
        auto cfg = members[i];
        cfg.epochs = epochs[i];
        out[i] = train_member(cfg, vocabs.at(cfg.preproc), train);
    });
    return out;
}

std::vector<CvReport> cv_all(const std::vector<MemberConfig>& members, const std::map<PreprocStrategy, Vocab>& vocabs,
                             const Dataset& gold, const RunConfig& cfg, const std::vector<PseudoExample>& pseudo,
                             int jobs) {
    std::vector<CvReport> reports(members.size());
    const auto fold_seed = derive_seed(cfg.seed, {fnv1a("folds")});
    parallel_for(members.size(), jobs, [&](std::size_t i) {
        reports[i] = cross_validate(members[i], vocabs.at(members[i].preproc), gold, cfg.cv.k, pseudo, fold_seed, 1);
    });
    return reports;
}

}  // namespace

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(ss.str());
    return hex.str();
}

void check_input_paths(const RunConfig& cfg, bool need_dev, bool need_test) {
    auto need = [](const fs::path& p, const char* what) {
        if (p.empty()) throw DataError(std::string("no ") + what + " file configured");
        if (!fs::is_regular_file(p)) throw DataError(std::string("missing ") + what + " file: " + p.string());
    };
    need(cfg.train, "train");
    if (need_dev) need(cfg.dev, "dev");
    if (need_test) need(cfg.test, "test");
}

Corpora load_corpora(const RunConfig& cfg, bool need_dev, bool need_test) {
    check_input_paths(cfg, need_dev, need_test);
    Corpora c;
    c.train = load_tsv(cfg.train, LabelColumn::Required);
    if (need_dev) c.dev = load_tsv(cfg.dev, LabelColumn::Required);
    if (need_test || (!cfg.test.empty() && fs::is_regular_file(cfg.test)))
        c.test = load_tsv(cfg.test, LabelColumn::Detect);
    return c;
}

std::string vocab_file_name(PreprocStrategy s) { return "vocab_" + std::string(strategy_name(s)) + ".json"; }

std::map<PreprocStrategy, Vocab> build_vocabs(const RunConfig& cfg, const Dataset& train, const Dataset& unlabeled) {
    std::set<PreprocStrategy> used;
    for (const auto& m : cfg.members) used.insert(m.preproc);
    std::map<PreprocStrategy, Vocab> out;
    for (auto s : used) {
        std::vector<std::vector<std::string>> corpus;
        for (const auto* ds : {&train, &unlabeled})
            for (const auto& e : ds->examples) corpus.push_back(tokenize(apply_strategy(s, e.text)));
        out.emplace(s, build_vocab(corpus, cfg.vocab.min_freq, cfg.vocab.max_size));
    }
    return out;
}

MemberProbs predict_members(const std::vector<TrainedMember>& members, const std::map<PreprocStrategy, Vocab>& vocabs,
                            const Dataset& ds, int jobs) {
    MemberProbs out(members.size());
    parallel_for(members.size(), jobs, [&](std::size_t m) {
        const auto& c = members[m].config;
        out[m] = predict(members[m].params, ds, vocabs.at(c.preproc), c.preproc, c.max_len);
    });
    return out;
}

std::map<std::string, double> soft_mean(const MemberProbs& probs, const Dataset& ds) {
    if (probs.empty()) throw UsageError("soft mean needs at least one member");
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double s = 0.0;
        for (const auto& p : probs) {
            if (p.size() != ds.size()) throw DataError("member probabilities do not match the dataset size");
            s += p[i];
        }
        out[ds.examples[i].id] = s / static_cast<double>(probs.size());
    }
    return out;
}

std::string cv_report_json(const CvReport& r) {
    nlohmann::ordered_json j;
    j["member"] = r.member;
    j["k"] = r.k;
    j["fold_fingerprint"] = r.fold_fingerprint;
    j["fold_f1"] = r.fold_f1;
    j["mean_f1"] = r.mean_f1;
    j["optimal_epoch"] = r.optimal_epoch;
    j["train_sizes"] = r.train_sizes;
    j["validation_sizes"] = r.validation_sizes;
    return j.dump(2);
}

std::string ensemble_audit_json(const std::vector<std::string>& member_names, const std::vector<std::string>& ids,
                                const MemberProbs& probs, const AggregationRule& rule, const CutoffTuning* tuning) {
    nlohmann::ordered_json j;
    j["rule"] = aggregation_name(rule.mode);
    if (rule.mode == AggregationMode::HardVote && rule.cutoff == std::floor(rule.cutoff))
        j["cutoff"] = static_cast<long long>(rule.cutoff);
    else
        j["cutoff"] = rule.cutoff;
    j["vote_threshold"] = rule.vote_threshold;
    j["members"] = member_names;
    if (tuning) {
        auto& t = j["tuning"];
        t["cutoff"] = tuning->cutoff;
        t["f1"] = tuning->f1;
        t["candidates"] = nlohmann::ordered_json::array();
        for (const auto& c : tuning->candidates)
            t["candidates"].push_back({{"cutoff", c.cutoff}, {"f1", c.f1}, {"pred_pos_ratio", c.pred_pos_ratio}});
    }
    j["ids"] = ids;
    j["member_probs"] = probs;
    return j.dump();
}

std::string pseudo_audit_json(const std::vector<PseudoExample>& pseudo, PseudoThresholds t) {
    nlohmann::ordered_json j;
    j["hi"] = t.hi;
    j["lo"] = t.lo;
    std::size_t pos = 0;
    for (const auto& p : pseudo) pos += p.pseudo_label == Label::Informative;
    j["count"] = pseudo.size();
    j["positive"] = pos;
    j["negative"] = pseudo.size() - pos;
    j["examples"] = nlohmann::ordered_json::array();
    for (const auto& p : pseudo)
        j["examples"].push_back({{"id", p.tweet.id}, {"prob", p.source_prob}, {"label", label_name(p.pseudo_label)}});
    return j.dump(2);
}

RunSummary run_pipeline(const RunConfig& cfg, const PipelineOptions& opts) {
    cfg.validate();
    const Logger log(opts.log);
    const int jobs = std::max(1, opts.jobs);
    const fs::path out = cfg.output_dir;
    const auto members = cfg.effective_members();

    // prep
    const auto data = load_corpora(cfg, true, cfg.pseudo.enabled);
    fs::create_directories(out);
    write_text(out / "config.resolved.json", cfg.to_json().dump(2));
    const auto vocabs = build_vocabs(cfg, data.train, data.test);
    fs::create_directories(out / "vocab");
    for (const auto& [s, v] : vocabs) v.save(out / "vocab" / vocab_file_name(s));
    log("prep: train=" + std::to_string(data.train.size()) + " dev=" + std::to_string(data.dev.size()) +
        " test=" + std::to_string(data.test.size()));

    RunSummary summary;

    // cv
    if (cfg.cv.enabled) {
        summary.cv = cv_all(members, vocabs, data.train, cfg, {}, jobs);
        for (const auto& r : summary.cv) {
            write_text(out / "cv" / (r.member + ".json"), cv_report_json(r));
            summary.optimal_epochs.push_back(r.optimal_epoch);
            log("cv: " + r.member + " optimal_epoch=" + std::to_string(r.optimal_epoch));
        }
    } else {
        for (const auto& m : members) summary.optimal_epochs.push_back(m.epochs);
    }

    // base
    summary.base = finish_stage("base", train_all(members, vocabs, summary.optimal_epochs, data.train, jobs), data,
                                vocabs, cfg, jobs, out, true);
    log("base: dev f1=" + std::to_string(summary.base.dev_scores.f1));

    // pseudo + final
    summary.final_stage = summary.base;
    if (cfg.pseudo.enabled) {
        const auto meta = soft_mean(summary.base.test_probs, data.test);
        std::vector<PseudoThresholds> grid{cfg.pseudo.thresholds};
        if (cfg.pseudo.grid_search) grid = {{0.8, 0.2}, {0.9, 0.1}, {0.95, 0.05}};

        nlohmann::ordered_json grid_log = nlohmann::ordered_json::array();
        bool have = false;
        for (const auto& t : grid) {
            auto pseudo = generate_pseudo_labels(meta, data.test, t);
            auto epochs = summary.optimal_epochs;
            if (cfg.pseudo.cv_with_pseudo && cfg.cv.enabled) {
                const auto reports = cv_all(members, vocabs, data.train, cfg, pseudo, jobs);
                for (std::size_t i = 0; i < reports.size(); ++i) {
                    epochs[i] = reports[i].optimal_epoch;
                    if (!cfg.pseudo.grid_search)
                        write_text(out / "cv_pseudo" / (reports[i].member + ".json"), cv_report_json(reports[i]));
                }
            }
            auto final_models = augment_and_train_final(members, vocabs, epochs, data.train, pseudo, t, jobs);
            auto stage = finish_stage("final", std::move(final_models.members), data, vocabs, cfg, jobs, out, false);
            grid_log.push_back({{"hi", t.hi},
                                {"lo", t.lo},
                                {"pseudo_count", pseudo.size()},
                                {"dev_f1", stage.dev_scores.f1}});
            log("pseudo: hi=" + std::to_string(t.hi) + " lo=" + std::to_string(t.lo) +
                " count=" + std::to_string(pseudo.size()) + " dev f1=" + std::to_string(stage.dev_scores.f1));
            if (!have || stage.dev_scores.f1 > summary.final_stage.dev_scores.f1) {
                have = true;
                summary.final_stage = std::move(stage);
                summary.pseudo = std::move(pseudo);
                summary.thresholds = t;
            }
        }
        summary.augmented = true;
        fs::create_directories(out / "pseudo");
        save_tsv(out / "pseudo" / "pseudo.tsv", pseudo_as_dataset(summary.pseudo));
        write_text(out / "pseudo" / "audit.json", pseudo_audit_json(summary.pseudo, summary.thresholds));
        if (cfg.pseudo.grid_search) write_text(out / "pseudo" / "grid.json", grid_log.dump(2));
        std::vector<TrainedMember> kept = std::move(summary.final_stage.members);
        summary.final_stage = finish_stage("final", std::move(kept), data, vocabs, cfg, jobs, out, true);
        log("final: dev f1=" + std::to_string(summary.final_stage.dev_scores.f1));
    }

    // ablation
    const auto report = ablation_report(names_of(members), summary.base.dev_probs, summary.final_stage.dev_probs,
                                        data.dev.labels(), summary.final_stage.rule);
    write_text(out / "ablation.json", report.to_json());
    write_text(out / "ablation.txt", report.to_text());
    if (!data.test.empty()) save_predictions(out / "predictions.tsv", pred_rows(data.test, summary.final_stage.test_pred));

    // manifest
    nlohmann::ordered_json m;
    m["config"] = cfg.to_json();
    m["optimal_epochs"] = summary.optimal_epochs;
    m["augmented"] = summary.augmented;
    m["pseudo"] = {{"count", summary.pseudo.size()}};
    if (summary.augmented) {
        m["pseudo"]["hi"] = summary.thresholds.hi;
        m["pseudo"]["lo"] = summary.thresholds.lo;
    }
    auto scores = [](const PrfScores& s) {
        return nlohmann::ordered_json{
            {"precision", round4(s.precision)}, {"recall", round4(s.recall)}, {"f1", round4(s.f1)}};
    };
    m["dev"] = {{"base", scores(summary.base.dev_scores)}, {"final", scores(summary.final_stage.dev_scores)}};
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(out))
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    m["files"] = nlohmann::ordered_json::object();
    for (const auto& f : files) m["files"][fs::relative(f, out).generic_string()] = file_digest(f);
    summary.manifest_json = m.dump(2);
    write_text(out / "manifest.json", summary.manifest_json);
    return summary;
}

}  // namespace tweetsift
