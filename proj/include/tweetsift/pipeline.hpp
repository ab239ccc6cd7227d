#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "tweetsift/config.hpp"
#include "tweetsift/ensemble.hpp"
#include "tweetsift/metrics.hpp"
#include "tweetsift/training.hpp"

namespace tweetsift {

struct PipelineOptions {
    int jobs = 1;                  // never changes results, only wall time
    std::ostream* log = nullptr;   // progress lines; nothing is logged when null
};

struct Corpora {
    Dataset train;
    Dataset dev;
    Dataset test;  // unlabeled pool; may be empty
};

// Checks every configured path up front and throws DataError naming the
// first one that is missing.
void check_input_paths(const RunConfig& cfg, bool need_dev, bool need_test);
Corpora load_corpora(const RunConfig& cfg, bool need_dev, bool need_test);

// One vocabulary per preprocessing strategy used by the members, built from
// the training texts plus the unlabeled pool texts.
std::map<PreprocStrategy, Vocab> build_vocabs(const RunConfig& cfg, const Dataset& train, const Dataset& unlabeled);
std::string vocab_file_name(PreprocStrategy s);

// Probabilities [member][example] in EVAL mode.
MemberProbs predict_members(const std::vector<TrainedMember>& members, const std::map<PreprocStrategy, Vocab>& vocabs,
                            const Dataset& ds, int jobs = 1);

// Element-wise mean over members, keyed by tweet id.
std::map<std::string, double> soft_mean(const MemberProbs& probs, const Dataset& ds);

std::string cv_report_json(const CvReport& r);
std::string ensemble_audit_json(const std::vector<std::string>& member_names, const std::vector<std::string>& ids,
                                const MemberProbs& probs, const AggregationRule& rule,
                                const CutoffTuning* tuning = nullptr);
std::string pseudo_audit_json(const std::vector<PseudoExample>& pseudo, PseudoThresholds t);

struct StageResult {
    std::vector<TrainedMember> members;
    MemberProbs dev_probs;
    MemberProbs test_probs;
    AggregationRule rule;
    std::vector<Label> dev_pred;
    std::vector<Label> test_pred;
    ConfusionMatrix dev_confusion;
    PrfScores dev_scores;
};

struct RunSummary {
    std::vector<CvReport> cv;
    std::vector<int> optimal_epochs;
    StageResult base;
    StageResult final_stage;  // equals base when pseudo-labelling is disabled
    bool augmented = false;
    PseudoThresholds thresholds;
    std::vector<PseudoExample> pseudo;
    std::string manifest_json;
};

// Full run: prep, cv, base training and ensemble, pseudo-labelling, final
// training and ensemble, metrics and ablation. Everything lands under
// cfg.output_dir; manifest.json lists each file with its content hash.
RunSummary run_pipeline(const RunConfig& cfg, const PipelineOptions& opts = {});

// FNV-1a over file bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace tweetsift
