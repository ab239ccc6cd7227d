#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tweetsift/corpus.hpp"
#include "tweetsift/metrics.hpp"

namespace tweetsift {

enum class AggregationMode { HardVote, SoftSum };

std::string_view aggregation_name(AggregationMode m) noexcept;
AggregationMode parse_aggregation(std::string_view s);  // "HARD_VOTE"/"hard", "SOFT_SUM"/"soft"

struct AggregationRule {
    AggregationMode mode = AggregationMode::HardVote;
    double cutoff = 4.0;
    double vote_threshold = 0.5;  // a member votes positive iff p > threshold
};

// member_probs[m][i]: probability of member m for example i.
using MemberProbs = std::vector<std::vector<double>>;

// HARD_VOTE: positive iff #{m : p_m > 0.5} >= cutoff.
// SOFT_SUM:  positive iff sum_m p_m >= cutoff.
std::vector<Label> aggregate(const MemberProbs& member_probs, const AggregationRule& rule);

// Strict rule validation for configs: integer cutoff in 1..M for HARD_VOTE,
// (0, M) for SOFT_SUM.
void validate_rule(const AggregationRule& rule, std::size_t members);

struct CutoffCandidate {
    double cutoff = 0.0;
    double f1 = 0.0;
    double pred_pos_ratio = 0.0;
};

struct CutoffTuning {
    double cutoff = 0.0;
    double f1 = 0.0;
    std::vector<CutoffCandidate> candidates;
};

// HARD_VOTE searches 1..M, SOFT_SUM the grid 0, 0.05, ..., M. Ties in F1 go
// to the cutoff whose predicted positive ratio is closest to
// train_pos_ratio, then to the larger cutoff.
CutoffTuning tune_cutoff(const MemberProbs& member_probs, const std::vector<Label>& gold, AggregationMode mode,
                         double train_pos_ratio);

struct AblationRow {
    std::string name;
    PrfScores without_aug;
    PrfScores with_aug;
};

struct AblationReport {
    std::vector<AblationRow> rows;  // members then "ensemble"
    AggregationRule rule;

    std::string to_json() const;
    std::string to_text() const;
};

AblationReport ablation_report(const std::vector<std::string>& member_names, const MemberProbs& without_aug,
                               const MemberProbs& with_aug, const std::vector<Label>& gold,
                               const AggregationRule& rule);

}  // namespace tweetsift
