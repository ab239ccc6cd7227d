#include "tweetsift/ensemble.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "tweetsift/error.hpp"

namespace tweetsift {

std::string_view aggregation_name(AggregationMode m) noexcept {
    return m == AggregationMode::HardVote ? "HARD_VOTE" : "SOFT_SUM";
}

AggregationMode parse_aggregation(std::string_view s) {
    if (s == "HARD_VOTE" || s == "hard") return AggregationMode::HardVote;
    if (s == "SOFT_SUM" || s == "soft") return AggregationMode::SoftSum;
    throw UsageError("unknown aggregation rule '" + std::string(s) + "'");
}

namespace {

std::size_t check_probs(const MemberProbs& probs) {
    if (probs.empty()) throw DataError("aggregate: no members");
    const std::size_t n = probs.front().size();
    for (const auto& m : probs) {
        if (m.size() != n) throw DataError("aggregate: member probability vectors differ in length");
        for (double p : m)
            if (!(p >= 0.0 && p <= 1.0)) throw DataError("aggregate: probability outside [0, 1]");
    }
    return n;
}

}  // namespace

std::vector<Label> aggregate(const MemberProbs& member_probs, const AggregationRule& rule) {
    const std::size_t n = check_probs(member_probs);
    std::vector<Label> out(n, Label::Uninformative);
    for (std::size_t i = 0; i < n; ++i) {
        double score = 0.0;
        for (const auto& m : member_probs)
            score += rule.mode == AggregationMode::HardVote ? (m[i] > rule.vote_threshold ? 1.0 : 0.0) : m[i];
        if (score >= rule.cutoff) out[i] = Label::Informative;
    }
    return out;
}

void validate_rule(const AggregationRule& rule, std::size_t members) {
    const double m = static_cast<double>(members);
    if (rule.mode == AggregationMode::HardVote) {
        if (rule.cutoff != std::floor(rule.cutoff) || rule.cutoff < 1.0 || rule.cutoff > m)
            throw UsageError("HARD_VOTE cutoff must be an integer in 1.." + std::to_string(members));
    } else if (!(rule.cutoff > 0.0 && rule.cutoff < m)) {
        throw UsageError("SOFT_SUM cutoff must lie in (0, " + std::to_string(members) + ")");
    }
}

CutoffTuning tune_cutoff(const MemberProbs& member_probs, const std::vector<Label>& gold, AggregationMode mode,
                         double train_pos_ratio) {
    const std::size_t n = check_probs(member_probs);
    if (gold.empty()) throw DataError("tune_cutoff: empty dev set");
    if (gold.size() != n) throw DataError("tune_cutoff: gold length differs from predictions");
    const std::size_t members = member_probs.size();

    std::vector<double> grid;
    if (mode == AggregationMode::HardVote) {
        for (std::size_t c = 1; c <= members; ++c) grid.push_back(static_cast<double>(c));
    } else {
        for (std::size_t i = 0; i <= 20 * members; ++i) grid.push_back(static_cast<double>(i) / 20.0);
    }

    CutoffTuning best;
    bool have = false;
    double best_gap = 0.0;
    for (double c : grid) {
        const auto labels = aggregate(member_probs, {mode, c, 0.5});
        const CutoffCandidate cand{c, prf(confusion(labels, gold)).f1, positive_ratio(labels)};
        best.candidates.push_back(cand);
        const double gap = std::abs(cand.pred_pos_ratio - train_pos_ratio);
        // Grid is ascending, so ">=" on the final tie keeps the larger cutoff.
        const bool better = !have || cand.f1 > best.f1 || (cand.f1 == best.f1 && gap <= best_gap);
        if (better) {
            best.cutoff = c;
            best.f1 = cand.f1;
            best_gap = gap;
            have = true;
        }
    }
    return best;
}

namespace {

nlohmann::ordered_json scores_json(const PrfScores& s) {
    return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

}  // namespace

std::string AblationReport::to_json() const {
    nlohmann::ordered_json j;
    j["rule"] = {{"mode", aggregation_name(rule.mode)}, {"cutoff", rule.cutoff}};
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"name", r.name},
                             {"without_augmentation", scores_json(r.without_aug)},
                             {"with_augmentation", scores_json(r.with_aug)}});
    return j.dump(2);
}

std::string AblationReport::to_text() const {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s | %-26s | %-26s\n", static_cast<int>(width), "Model", "Without augmentation",
                  "With augmentation");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-*s | %8s %8s %8s | %8s %8s %8s\n", static_cast<int>(width), "", "P", "R", "F1",
                  "P", "R", "F1");
    os << buf << std::string(width + 58, '-') << '\n';
    for (const auto& r : rows) {
        const auto& a = r.without_aug;
        const auto& b = r.with_aug;
        std::snprintf(buf, sizeof buf, "%-*s | %8.4f %8.4f %8.4f | %8.4f %8.4f %8.4f\n", static_cast<int>(width),
                      r.name.c_str(), round4(a.precision), round4(a.recall), round4(a.f1), round4(b.precision),
                      round4(b.recall), round4(b.f1));
        os << buf;
    }
    return os.str();
}

AblationReport ablation_report(const std::vector<std::string>& member_names, const MemberProbs& without_aug,
                               const MemberProbs& with_aug, const std::vector<Label>& gold,
                               const AggregationRule& rule) {
    if (member_names.size() != without_aug.size() || member_names.size() != with_aug.size())
        throw DataError("ablation_report: member count mismatch");
    check_probs(without_aug);
    check_probs(with_aug);
    if (without_aug.front().size() != gold.size() || with_aug.front().size() != gold.size())
        throw DataError("ablation_report: predictions do not cover the dev set");
    const auto member_scores = [&](const std::vector<double>& probs) {
        std::vector<Label> labels(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i)
            labels[i] = probs[i] > rule.vote_threshold ? Label::Informative : Label::Uninformative;
        return prf(confusion(labels, gold));
    };
    AblationReport rep;
    rep.rule = rule;
    for (std::size_t m = 0; m < member_names.size(); ++m)
        rep.rows.push_back({member_names[m], member_scores(without_aug[m]), member_scores(with_aug[m])});
    rep.rows.push_back({"ensemble", prf(confusion(aggregate(without_aug, rule), gold)),
                        prf(confusion(aggregate(with_aug, rule), gold))});
    return rep;
}

}  // namespace tweetsift
