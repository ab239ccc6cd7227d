#include "tweetsift/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "contractions_data.hpp"
#include "tweetsift/error.hpp"

namespace tweetsift {

namespace {

using json = nlohmann::json;

constexpr bool is_space(unsigned char c) noexcept { return c == ' ' || (c >= '\t' && c <= '\r'); }
constexpr char lower(char c) noexcept { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }
constexpr char upper(char c) noexcept { return (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c; }
constexpr bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

std::vector<std::string_view> split_ws(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) noexcept {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (lower(a[i]) != lower(b[i])) return false;
    return true;
}

bool iends_with(std::string_view s, std::string_view suffix) noexcept {
    return s.size() >= suffix.size() && iequals(s.substr(s.size() - suffix.size()), suffix);
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (p.empty()) continue;
        if (!out.empty()) out += ' ';
        out += p;
    }
    return out;
}

bool drop_piece(std::string_view p) {
    return p.find("http") != std::string_view::npos || p.starts_with("www.") ||
           p.find('@') != std::string_view::npos;
}

// Splits runs of two or more '.' or '!' into single-character pieces.
void split_runs(std::string_view tok, std::vector<std::string>& out) {
    std::string cur;
    std::size_t i = 0;
    while (i < tok.size()) {
        const char c = tok[i];
        if (c == '.' || c == '!') {
            std::size_t j = i;
            while (j < tok.size() && tok[j] == c) ++j;
            if (j - i >= 2) {
                if (!cur.empty()) out.push_back(std::move(cur));
                cur.clear();
                for (std::size_t n = i; n < j; ++n) out.emplace_back(1, c);
            } else {
                cur += c;
            }
            i = j;
        } else {
            cur += c;
            ++i;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
}

std::string normalize_quotes(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        // U+2018 / U+2019 in UTF-8
        if (i + 2 < text.size() && static_cast<unsigned char>(text[i]) == 0xE2 &&
            static_cast<unsigned char>(text[i + 1]) == 0x80 &&
            (static_cast<unsigned char>(text[i + 2]) == 0x98 || static_cast<unsigned char>(text[i + 2]) == 0x99)) {
            out += '\'';
            i += 2;
        } else {
            out += text[i];
        }
    }
    return out;
}

std::string match_case(std::string_view original, std::string replacement) {
    if (!original.empty() && original[0] >= 'A' && original[0] <= 'Z' && !replacement.empty())
        replacement[0] = upper(replacement[0]);
    return replacement;
}

std::string expand_core(std::string_view core, const ContractionTable& table) {
    if (core.find('\'') != std::string_view::npos) {
        for (const auto& [w, rep] : table.words)
            if (iequals(core, w)) return match_case(core, rep);
        for (const auto& [suf, rep] : table.suffixes)
            if (core.size() > suf.size() && iends_with(core, suf))
                return std::string(core.substr(0, core.size() - suf.size())) + rep;
        return std::string(core);
    }
    if (core.size() >= 2 && is_digit(core.front())) {
        const auto it = table.numeric_suffixes.find(core.back());
        if (it != table.numeric_suffixes.end()) {
            const auto num = core.substr(0, core.size() - 1);
            const bool numeric = is_digit(num.back()) && std::all_of(num.begin(), num.end(), [](char c) {
                return is_digit(c) || c == '.' || c == ',';
            });
            if (numeric) return std::string(num) + " " + it->second;
        }
    }
    return std::string(core);
}

}  // namespace

std::string_view strategy_name(PreprocStrategy s) noexcept {
    switch (s) {
        case PreprocStrategy::P1: return "P1";
        case PreprocStrategy::P2: return "P2";
        case PreprocStrategy::P2ThenP1: return "P2_THEN_P1";
    }
    return "P1";
}

PreprocStrategy parse_strategy(std::string_view s) {
    if (s == "P1") return PreprocStrategy::P1;
    if (s == "P2") return PreprocStrategy::P2;
    if (s == "P2_THEN_P1") return PreprocStrategy::P2ThenP1;
    throw UsageError("unknown preprocessing strategy '" + std::string(s) + "'");
}

std::string preproc1(std::string_view text) {
    std::vector<std::string> pieces;
    for (auto raw : split_ws(text)) {
        std::string tok;
        tok.reserve(raw.size());
        for (char c : raw) {
            const auto u = static_cast<unsigned char>(c);
            if (u < 0x20 || u >= 0x7F) continue;  // non-ASCII and control bytes
            tok += lower(c);
        }
        if (tok.empty()) continue;
        std::vector<std::string> split;
        split_runs(tok, split);
        for (auto& p : split)
            if (!drop_piece(p)) pieces.push_back(std::move(p));
    }
    auto first = std::find_if(pieces.begin(), pieces.end(), [](const std::string& p) { return p != "rt"; });
    pieces.erase(pieces.begin(), first);
    return join(pieces);
}

ContractionTable ContractionTable::from_json(std::string_view json_text) {
    ContractionTable t;
    try {
        const auto j = json::parse(json_text);
        for (const auto& [k, v] : j.at("words").items()) t.words.emplace_back(k, v.get<std::string>());
        for (const auto& [k, v] : j.at("suffixes").items()) t.suffixes.emplace_back(k, v.get<std::string>());
        const auto numeric = j.value("numeric_suffixes", json::object());
        for (const auto& [k, v] : numeric.items()) {
            if (k.size() != 1) throw DataError("numeric suffix keys must be single characters: '" + k + "'");
            t.numeric_suffixes.emplace(k[0], v.get<std::string>());
        }
        const auto abbreviations = j.value("abbreviations", json::array());
        for (const auto& a : abbreviations) t.abbreviations.push_back(a.get<std::string>());
    } catch (const json::exception& e) {
        throw DataError(std::string("contraction table: ") + e.what());
    }
    std::stable_sort(t.suffixes.begin(), t.suffixes.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    return t;
}

ContractionTable ContractionTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

const ContractionTable& ContractionTable::builtin() {
    static const ContractionTable table = from_json(detail::contractions_json);
    return table;
}

std::string preproc2(std::string_view text, const ContractionTable& table) {
    const std::string norm = normalize_quotes(text);
    const auto toks = split_ws(norm);

    // Collapse "p . m ." style spacing back into the listed abbreviations.
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < toks.size();) {
        bool matched = false;
        for (const auto& abbr : table.abbreviations) {
            // abbr is letter '.' letter '.' ...; spaced form has one token per char.
            if (i + abbr.size() > toks.size()) continue;
            bool ok = true;
            for (std::size_t c = 0; c < abbr.size() && ok; ++c)
                ok = toks[i + c].size() == 1 && lower(toks[i + c][0]) == lower(abbr[c]);
            if (!ok) continue;
            std::string joined;
            for (std::size_t c = 0; c < abbr.size(); ++c) joined += toks[i + c][0];
            merged.push_back(std::move(joined));
            i += abbr.size();
            matched = true;
            break;
        }
        if (!matched) merged.emplace_back(toks[i++]);
    }

    static constexpr std::string_view lead_punct = "([\"";
    static constexpr std::string_view trail_punct = ".,!?;:)]\"";
    std::vector<std::string> out;
    out.reserve(merged.size());
    for (const auto& tok : merged) {
        std::string_view sv = tok;
        std::size_t b = 0, e = sv.size();
        while (b < e && lead_punct.find(sv[b]) != std::string_view::npos) ++b;
        while (e > b && trail_punct.find(sv[e - 1]) != std::string_view::npos) --e;
        const auto core = sv.substr(b, e - b);
        if (core.empty() ||
            std::find(table.abbreviations.begin(), table.abbreviations.end(), tok) != table.abbreviations.end()) {
            out.push_back(tok);
            continue;
        }
        out.push_back(std::string(sv.substr(0, b)) + expand_core(core, table) + std::string(sv.substr(e)));
    }
    return join(out);
}

std::string apply_strategy(PreprocStrategy s, std::string_view text) {
    switch (s) {
        case PreprocStrategy::P1: return preproc1(text);
        case PreprocStrategy::P2: return preproc2(text);
        case PreprocStrategy::P2ThenP1: return preproc1(preproc2(text));
    }
    return std::string(text);
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (auto t : split_ws(text)) out.emplace_back(t);
    return out;
}

Vocab::Vocab() : id_to_token_{std::string(pad_token), std::string(unk_token)} {}

Vocab Vocab::from_tokens(std::vector<std::string> content, int min_freq, int max_size) {
    Vocab v;
    v.min_freq_ = min_freq;
    v.max_size_ = max_size;
    for (auto& t : content) {
        if (t == pad_token || t == unk_token || t.empty())
            throw DataError("vocab: reserved or empty token in content list");
        const int id = static_cast<int>(v.id_to_token_.size());
        if (!v.token_to_id_.emplace(t, id).second) throw DataError("vocab: duplicate token '" + t + "'");
        v.id_to_token_.push_back(std::move(t));
    }
    return v;
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& corpus, int min_freq, int max_size) {
    if (min_freq < 1) throw UsageError("build_vocab: min_freq must be >= 1");
    if (max_size < 3) throw UsageError("build_vocab: max_size must be >= 3");
    std::map<std::string, long, std::less<>> freq;
    for (const auto& seq : corpus)
        for (const auto& t : seq)
            if (t != pad_token && t != unk_token) ++freq[t];
    std::vector<std::pair<std::string, long>> kept;
    for (auto& [t, n] : freq)
        if (n >= min_freq) kept.emplace_back(t, n);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    const auto cap = static_cast<std::size_t>(max_size - 2);
    if (kept.size() > cap) kept.resize(cap);
    std::vector<std::string> content;
    content.reserve(kept.size());
    for (auto& [t, n] : kept) content.push_back(std::move(t));
    return from_tokens(std::move(content), min_freq, max_size);
}

int Vocab::id(std::string_view token) const {
    const auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? unk_id : it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw DataError("vocab: id out of range: " + std::to_string(id));
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::string Vocab::to_json() const {
    json j;
    j["tokens"] = id_to_token_;
    j["min_freq"] = min_freq_;
    j["max_size"] = max_size_;
    return j.dump();
}

Vocab Vocab::from_json(std::string_view json_text) {
    try {
        const auto j = json::parse(json_text);
        auto tokens = j.at("tokens").get<std::vector<std::string>>();
        if (tokens.size() < 2 || tokens[0] != pad_token || tokens[1] != unk_token)
            throw DataError("vocab: tokens must start with <pad>, <unk>");
        tokens.erase(tokens.begin(), tokens.begin() + 2);
        return from_tokens(std::move(tokens), j.at("min_freq").get<int>(), j.at("max_size").get<int>());
    } catch (const json::exception& e) {
        throw DataError(std::string("vocab json: ") + e.what());
    }
}

void Vocab::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << to_json() << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

EncodedExample encode(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t max_len) {
    if (max_len < 1) throw UsageError("encode: max_len must be >= 1");
    EncodedExample ex;
    ex.true_len = std::min(tokens.size(), max_len);
    ex.ids.assign(max_len, Vocab::pad_id);
    ex.mask.assign(max_len, 0);
    for (std::size_t i = 0; i < ex.true_len; ++i) {
        ex.ids[i] = vocab.id(tokens[i]);
        ex.mask[i] = 1;
    }
    return ex;
}

}  // namespace tweetsift
