#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tweetsift {

enum class PreprocStrategy { P1, P2, P2ThenP1 };

std::string_view strategy_name(PreprocStrategy s) noexcept;
PreprocStrategy parse_strategy(std::string_view s);

// Lowercase ASCII, URLs / mentions / leading "rt" removed, runs of '.' and of
// '!' split into single-character tokens, whitespace collapsed. Idempotent.
std::string preproc1(std::string_view text);

// Contraction table used by preproc2. The default instance is compiled from
// data/contractions.json.
struct ContractionTable {
    std::vector<std::pair<std::string, std::string>> words;     // whole-token
    std::vector<std::pair<std::string, std::string>> suffixes;  // longest match first
    std::map<char, std::string> numeric_suffixes;               // "5M" -> "5 million"
    std::vector<std::string> abbreviations;                     // "p.m." <- "p . m ."

    static ContractionTable from_json(std::string_view json_text);
    static ContractionTable load(const std::filesystem::path& path);
    static const ContractionTable& builtin();
};

std::string preproc2(std::string_view text, const ContractionTable& table = ContractionTable::builtin());

std::string apply_strategy(PreprocStrategy s, std::string_view text);

std::vector<std::string> tokenize(std::string_view text);

class Vocab {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr std::string_view pad_token = "<pad>";
    static constexpr std::string_view unk_token = "<unk>";

    Vocab();  // PAD and UNK only

    // Frequency >= min_freq, most frequent first, ties lexicographic,
    // truncated to max_size - 2 content tokens.
    static Vocab build(const std::vector<std::vector<std::string>>& corpus, int min_freq, int max_size);

    int id(std::string_view token) const;  // unk_id when absent
    const std::string& token(int id) const;
    std::size_t size() const noexcept { return id_to_token_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return id_to_token_; }
    int min_freq() const noexcept { return min_freq_; }
    int max_size() const noexcept { return max_size_; }

    std::string to_json() const;
    static Vocab from_json(std::string_view json_text);
    void save(const std::filesystem::path& path) const;
    static Vocab load(const std::filesystem::path& path);

    friend bool operator==(const Vocab& a, const Vocab& b) {
        return a.id_to_token_ == b.id_to_token_ && a.min_freq_ == b.min_freq_ && a.max_size_ == b.max_size_;
    }

private:
    static Vocab from_tokens(std::vector<std::string> content, int min_freq, int max_size);

    std::map<std::string, int, std::less<>> token_to_id_;
    std::vector<std::string> id_to_token_;
    int min_freq_ = 1;
    int max_size_ = 0;
};

inline Vocab build_vocab(const std::vector<std::vector<std::string>>& corpus, int min_freq, int max_size) {
    return Vocab::build(corpus, min_freq, max_size);
}

struct EncodedExample {
    std::vector<int> ids;   // length max_len
    std::vector<int> mask;  // mask[i] == 1 iff i < true_len
    std::size_t true_len = 0;
};

EncodedExample encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t max_len);

}  // namespace tweetsift
