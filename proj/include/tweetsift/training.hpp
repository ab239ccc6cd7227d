#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tweetsift/batching.hpp"
#include "tweetsift/corpus.hpp"
#include "tweetsift/model.hpp"
#include "tweetsift/optim.hpp"
#include "tweetsift/preprocess.hpp"

namespace tweetsift {

struct MemberConfig {
    std::string name;
    EncoderVariant variant = EncoderVariant::Xformer;
    PreprocStrategy preproc = PreprocStrategy::P1;
    std::size_t max_len = 128;
    int epochs = 4;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer;
    ScheduleKind schedule = ScheduleKind::Constant;
    double lr_min_ratio = 0.0;    // cosine floor as a fraction of optimizer.lr
    std::int64_t cycle_len = 0;   // steps; 0 means one epoch
    double cycle_mult = 1.0;
    FgmConfig fgm;
    MsdConfig msd;
    ModelDims dims;               // vocab_size and max_len are filled in at training time
    BatchMode bucketing = BatchMode::Bucketed;
    std::uint64_t seed = 0;

    void validate() const;
    LrSchedule resolved_schedule(std::int64_t steps_per_epoch) const;
};

// The six members: two transformer-style encoders (v1: Adam 2e-5, max_len 128;
// v2: AdamW(0.01) 3e-5, max_len 192, FGM), two bag-of-embeddings baselines with
// the same two optimiser settings, and two conv encoders (lr 3e-6, cosine
// restarts, 5 epochs, Preproc #2).
std::vector<MemberConfig> default_members(std::uint64_t base_seed);

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double adv_loss = 0.0;  // 0 when FGM is off
    std::optional<double> dev_f1;
};

struct TrainedMember {
    MemberConfig config;
    ModelParams params;
    std::vector<EpochRecord> history;
};

// Gold examples are used as-is; extra (pseudo-labelled) examples are appended
// to the training set with equal weight.
TrainedMember train_member(const MemberConfig& cfg, const Vocab& vocab, const Dataset& train,
                           const Dataset* dev = nullptr);

struct PseudoExample {
    LabeledTweet tweet;
    Label pseudo_label = Label::Uninformative;
    double source_prob = 0.0;
    bool is_pseudo = true;
};

struct PseudoThresholds {
    double hi = 0.9;
    double lo = 0.1;
};

// ŷ > hi -> INFORMATIVE, ŷ < lo -> UNINFORMATIVE, everything else dropped.
// Output follows the order of `unlabeled`.
std::vector<PseudoExample> generate_pseudo_labels(const std::map<std::string, double>& probs,
                                                  const Dataset& unlabeled, PseudoThresholds thresholds = {});

Dataset pseudo_as_dataset(const std::vector<PseudoExample>& pseudo, std::string name = "pseudo");

struct CvReport {
    std::string member;
    int k = 0;
    std::vector<std::vector<double>> fold_f1;  // [fold][epoch]
    std::vector<double> mean_f1;               // [epoch]
    int optimal_epoch = 0;                     // 1-based
    std::vector<std::size_t> train_sizes;
    std::vector<std::size_t> validation_sizes;
    std::uint64_t fold_fingerprint = 0;
};

// argmax of mean dev F1, ties to the earliest epoch; 1-based.
int optimal_epoch(const std::vector<double>& mean_f1);

// Folds are built on gold examples only; every pseudo example joins every
// training fold and never a validation fold.
CvReport cross_validate(const MemberConfig& cfg, const Vocab& vocab, const Dataset& gold, int k,
                        const std::vector<PseudoExample>& pseudo = {}, std::uint64_t fold_seed = 0, int jobs = 1);

// Throws LeakageError if a pseudo id sits in a validation fold, or if a
// validation id also appears in the fold's training set.
void check_fold_leakage(const Dataset& gold, const FoldAssignment& folds, const std::vector<PseudoExample>& pseudo);

struct AugmentationAudit {
    PseudoThresholds thresholds;
    std::size_t pseudo_count = 0;
    std::size_t pseudo_positive = 0;
    std::size_t pseudo_negative = 0;
};

struct FinalModels {
    std::vector<TrainedMember> members;
    AugmentationAudit audit;
};

// Each member is trained on gold ∪ pseudo for its chosen epoch count.
FinalModels augment_and_train_final(const std::vector<MemberConfig>& members,
                                    const std::map<PreprocStrategy, Vocab>& vocabs,
                                    const std::vector<int>& optimal_epochs, const Dataset& gold,
                                    const std::vector<PseudoExample>& pseudo, PseudoThresholds thresholds = {},
                                    int jobs = 1);

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception by
// index is rethrown after all tasks finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace tweetsift
