#include "tweetsift/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "tweetsift/error.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

namespace {

std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

bool is_number(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<Label> try_label(std::string_view s) {
    if (s == "INFORMATIVE") return Label::Informative;
    if (s == "UNINFORMATIVE") return Label::Uninformative;
    return std::nullopt;
}

std::string where(const std::string& name, std::size_t line) {
    std::ostringstream os;
    os << (name.empty() ? "<tsv>" : name) << ":" << line;
    return os.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    return in;
}

}  // namespace

std::string_view label_name(Label l) noexcept {
    return l == Label::Informative ? "INFORMATIVE" : "UNINFORMATIVE";
}

Label parse_label(std::string_view s) {
    if (auto l = try_label(s)) return *l;
    throw DataError("unknown label '" + std::string(s) + "'");
}

bool Dataset::fully_labeled() const noexcept {
    return std::all_of(examples.begin(), examples.end(), [](const auto& e) { return e.label.has_value(); });
}

std::vector<Label> Dataset::labels() const {
    std::vector<Label> out;
    out.reserve(examples.size());
    for (const auto& e : examples) {
        if (!e.label) throw DataError("example '" + e.id + "' in " + name + " has no label");
        out.push_back(*e.label);
    }
    return out;
}

Dataset parse_tsv(std::istream& in, LabelColumn labels, std::string name) {
    Dataset ds;
    ds.name = std::move(name);
    std::set<std::string, std::less<>> seen;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = strip_cr(raw);
        if (line.empty()) continue;

        const auto first = line.find('\t');
        const auto last = line.rfind('\t');
        if (first == std::string_view::npos)
            throw DataError(where(ds.name, lineno) + ": expected tab-separated fields");

        std::string_view id = line.substr(0, first);
        std::string_view text;
        std::optional<Label> label;
        bool has_label_field = false;
        switch (labels) {
            case LabelColumn::Absent:
                text = line.substr(first + 1);
                break;
            case LabelColumn::Required:
                if (last == first)
                    throw DataError(where(ds.name, lineno) + ": expected 3 fields (Id, Text, Label)");
                text = line.substr(first + 1, last - first - 1);
                has_label_field = true;
                break;
            case LabelColumn::Detect:
                if (last != first && try_label(line.substr(last + 1))) {
                    text = line.substr(first + 1, last - first - 1);
                    has_label_field = true;
                } else {
                    text = line.substr(first + 1);
                }
                break;
        }

        if (lineno == 1 && !is_number(id) && (text == "Text" || text.starts_with("Text\t"))) {
            continue;  // header row
        }
        if (has_label_field) {
            const auto lab = line.substr(last + 1);
            label = try_label(lab);
            if (!label)
                throw DataError(where(ds.name, lineno) + ": unknown label '" + std::string(lab) + "'");
        }
        if (id.empty()) throw DataError(where(ds.name, lineno) + ": empty id");
        if (text.empty()) throw DataError(where(ds.name, lineno) + ": empty text");
        if (!seen.emplace(id).second)
            throw DataError(where(ds.name, lineno) + ": duplicate id '" + std::string(id) + "'");
        ds.examples.push_back({std::string(id), std::string(text), label});
    }
    if (ds.examples.empty()) throw DataError((ds.name.empty() ? "<tsv>" : ds.name) + ": no data rows");
    return ds;
}

Dataset load_tsv(const std::filesystem::path& path, LabelColumn labels) {
    auto in = open_in(path);
    return parse_tsv(in, labels, path.string());
}

void write_tsv(std::ostream& out, const Dataset& ds) {
    const bool labeled = !ds.empty() && ds.fully_labeled();
    out << (labeled ? "Id\tText\tLabel\n" : "Id\tText\n");
    for (const auto& e : ds.examples) {
        out << e.id << '\t' << e.text;
        if (labeled) out << '\t' << label_name(*e.label);
        out << '\n';
    }
}

void save_tsv(const std::filesystem::path& path, const Dataset& ds) {
    auto out = open_out(path);
    write_tsv(out, ds);
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds) {
    auto out = open_out(path);
    out << "Id\tLabel\n";
    for (const auto& p : preds) out << p.id << '\t' << label_name(p.label) << '\n';
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<Prediction> out;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = strip_cr(raw);
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string_view::npos)
            throw DataError(where(path.string(), lineno) + ": expected Id<TAB>Label");
        const auto id = line.substr(0, tab);
        const auto lab = line.substr(tab + 1);
        if (lineno == 1 && lab == "Label") continue;
        auto l = try_label(lab);
        if (!l) throw DataError(where(path.string(), lineno) + ": unknown label '" + std::string(lab) + "'");
        if (id.empty()) throw DataError(where(path.string(), lineno) + ": empty id");
        out.push_back({std::string(id), *l});
    }
    if (out.empty()) throw DataError(path.string() + ": no data rows");
    return out;
}

void save_probabilities(const std::filesystem::path& path, const std::vector<ProbabilityRow>& rows) {
    auto out = open_out(path);
    out << "Id\tProbability\n" << std::setprecision(17);
    for (const auto& r : rows) out << r.id << '\t' << r.prob << '\n';
}

std::vector<ProbabilityRow> load_probabilities(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<ProbabilityRow> out;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = strip_cr(raw);
        if (line.empty()) continue;
        const auto tab = line.rfind('\t');
        if (tab == std::string_view::npos)
            throw DataError(where(path.string(), lineno) + ": expected Id<TAB>Probability");
        const auto field = line.substr(tab + 1);
        if (lineno == 1 && field == "Probability") continue;
        double p = 0.0;
        // from_chars for double is available in libstdc++ 11.
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), p);
        if (ec != std::errc{} || ptr != field.data() + field.size() || !(p >= 0.0 && p <= 1.0))
            throw DataError(where(path.string(), lineno) + ": bad probability '" + std::string(field) + "'");
        out.push_back({std::string(line.substr(0, tab)), p});
    }
    if (out.empty()) throw DataError(path.string() + ": no data rows");
    return out;
}

std::uint64_t FoldAssignment::fingerprint() const noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(k));
    for (const auto& [id, f] : fold_of) h = mix64(h ^ fnv1a(id) ^ static_cast<std::uint64_t>(f));
    return h;
}

FoldAssignment stratified_kfold(const Dataset& ds, int k, std::uint64_t seed) {
    if (k < 2) throw DataError("stratified_kfold: k must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& e = ds.examples[i];
        if (!e.label) throw DataError("stratified_kfold: example '" + e.id + "' is unlabeled");
        (*e.label == Label::Informative ? pos : neg).push_back(i);
    }
    // Classes smaller than k are fine: dealing continues across classes, so
    // fold sizes and per-fold positive counts still differ by at most one.
    if (ds.size() < static_cast<std::size_t>(k))
        throw DataError("stratified_kfold: need at least k = " + std::to_string(k) + " examples, got " +
                        std::to_string(ds.size()));

    Rng rng(derive_seed(seed, {fnv1a("kfold")}));
    rng.shuffle(pos);
    rng.shuffle(neg);

    FoldAssignment fa;
    fa.k = k;
    fa.fold_by_index.assign(ds.size(), -1);
    std::size_t next = 0;
    for (const auto* cls : {&pos, &neg}) {
        for (auto idx : *cls) {
            const int f = static_cast<int>(next++ % static_cast<std::size_t>(k));
            fa.fold_by_index[idx] = f;
            fa.fold_of.emplace(ds.examples[idx].id, f);
        }
    }
    return fa;
}

ClassDistribution class_distribution(const Dataset& ds) {
    if (ds.empty()) throw DataError("class_distribution: empty dataset");
    ClassDistribution d;
    for (const auto& e : ds.examples) {
        if (!e.label) throw DataError("class_distribution: example '" + e.id + "' is unlabeled");
        (*e.label == Label::Informative ? d.positives : d.negatives)++;
    }
    d.positive_ratio = static_cast<double>(d.positives) / static_cast<double>(ds.size());
    return d;
}

}  // namespace tweetsift
