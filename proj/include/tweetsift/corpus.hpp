#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tweetsift {

enum class Label : int { Uninformative = 0, Informative = 1 };

constexpr int to_int(Label l) noexcept { return static_cast<int>(l); }
std::string_view label_name(Label l) noexcept;
// "INFORMATIVE" / "UNINFORMATIVE"; anything else throws DataError.
Label parse_label(std::string_view s);

struct LabeledTweet {
    std::string id;
    std::string text;
    std::optional<Label> label;

    friend bool operator==(const LabeledTweet&, const LabeledTweet&) = default;
};

struct Dataset {
    std::string name;
    std::vector<LabeledTweet> examples;

    std::size_t size() const noexcept { return examples.size(); }
    bool empty() const noexcept { return examples.empty(); }
    bool fully_labeled() const noexcept;
    std::vector<Label> labels() const;  // throws if any label is missing

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class LabelColumn {
    Absent,    // Id<TAB>Text
    Required,  // Id<TAB>Text<TAB>Label
    Detect,    // label taken from the last field when it parses as one
};

Dataset parse_tsv(std::istream& in, LabelColumn labels, std::string name = {});
Dataset load_tsv(const std::filesystem::path& path, LabelColumn labels);
inline Dataset load_tsv(const std::filesystem::path& path, bool labeled) {
    return load_tsv(path, labeled ? LabelColumn::Required : LabelColumn::Absent);
}

// Writes a header row and one line per tweet; the label column is emitted
// when every example carries a label.
void write_tsv(std::ostream& out, const Dataset& ds);
void save_tsv(const std::filesystem::path& path, const Dataset& ds);

struct Prediction {
    std::string id;
    Label label;
};
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

struct ProbabilityRow {
    std::string id;
    double prob;
};
// Id<TAB>Probability, probabilities written with round-trip precision.
void save_probabilities(const std::filesystem::path& path, const std::vector<ProbabilityRow>& rows);
std::vector<ProbabilityRow> load_probabilities(const std::filesystem::path& path);

struct FoldAssignment {
    int k = 0;
    std::map<std::string, int> fold_of;
    std::vector<int> fold_by_index;  // aligned with Dataset::examples

    std::uint64_t fingerprint() const noexcept;
};

// Round-robin dealing of per-class seeded shuffles: positives first, negatives
// continue from the fold where positives stopped, so fold sizes differ by at
// most one and so do per-fold positive counts.
FoldAssignment stratified_kfold(const Dataset& ds, int k, std::uint64_t seed);

struct ClassDistribution {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    double positive_ratio = 0.0;
};
ClassDistribution class_distribution(const Dataset& ds);

}  // namespace tweetsift
