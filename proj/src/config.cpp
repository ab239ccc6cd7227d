#include "tweetsift/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "tweetsift/error.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!j.is_object()) throw UsageError(std::string(where) + ": expected a JSON object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || k == a;
        if (!ok) throw UsageError(std::string(where) + ": unknown key '" + k + "'");
    }
}

template <class T>
void read(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.empty() || path.is_absolute() || base.empty()) return path;
    return base / path;
}

}  // namespace

Json member_to_json(const MemberConfig& m) {
    Json j;
    j["name"] = m.name;
    j["variant"] = variant_name(m.variant);
    j["preproc"] = strategy_name(m.preproc);
    j["max_len"] = m.max_len;
    j["epochs"] = m.epochs;
    j["batch_size"] = m.batch_size;
    j["bucketing"] = batch_mode_name(m.bucketing);
    j["optimizer"] = {{"kind", optimizer_name(m.optimizer.kind)},
                      {"lr", m.optimizer.lr},
                      {"beta1", m.optimizer.beta1},
                      {"beta2", m.optimizer.beta2},
                      {"eps", m.optimizer.eps},
                      {"weight_decay", m.optimizer.weight_decay}};
    j["schedule"] = {{"kind", schedule_name(m.schedule)},
                     {"lr_min_ratio", m.lr_min_ratio},
                     {"cycle_len", m.cycle_len},
                     {"cycle_mult", m.cycle_mult}};
    j["fgm"] = {{"enabled", m.fgm.enabled}, {"epsilon", m.fgm.epsilon}};
    j["msd"] = {{"k", m.msd.k}, {"p", m.msd.p}};
    j["dims"] = {{"d", m.dims.d},
                 {"heads", m.dims.heads},
                 {"ffn", m.dims.ffn},
                 {"conv_filters", m.dims.conv_filters},
                 {"conv_width", m.dims.conv_width}};
    j["seed"] = m.seed;
    return j;
}

MemberConfig member_from_json(const Json& j, const MemberConfig& defaults) {
    MemberConfig m = defaults;
    try {
        check_keys(j, {"name", "variant", "preproc", "max_len", "epochs", "batch_size", "bucketing", "optimizer",
                       "schedule", "fgm", "msd", "dims", "seed"},
                   "member");
        read(j, "name", m.name);
        if (j.contains("variant")) m.variant = parse_variant(j.at("variant").get<std::string>());
        if (j.contains("preproc")) m.preproc = parse_strategy(j.at("preproc").get<std::string>());
        read(j, "max_len", m.max_len);
        read(j, "epochs", m.epochs);
        read(j, "batch_size", m.batch_size);
        if (j.contains("bucketing")) m.bucketing = parse_batch_mode(j.at("bucketing").get<std::string>());
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            check_keys(o, {"kind", "lr", "beta1", "beta2", "eps", "weight_decay"}, "member.optimizer");
            if (o.contains("kind")) m.optimizer.kind = parse_optimizer(o.at("kind").get<std::string>());
            read(o, "lr", m.optimizer.lr);
            read(o, "beta1", m.optimizer.beta1);
            read(o, "beta2", m.optimizer.beta2);
            read(o, "eps", m.optimizer.eps);
            read(o, "weight_decay", m.optimizer.weight_decay);
        }
        if (j.contains("schedule")) {
            const auto& s = j.at("schedule");
            check_keys(s, {"kind", "lr_min_ratio", "cycle_len", "cycle_mult"}, "member.schedule");
            if (s.contains("kind")) m.schedule = parse_schedule(s.at("kind").get<std::string>());
            read(s, "lr_min_ratio", m.lr_min_ratio);
            read(s, "cycle_len", m.cycle_len);
            read(s, "cycle_mult", m.cycle_mult);
        }
        if (j.contains("fgm")) {
            const auto& f = j.at("fgm");
            check_keys(f, {"enabled", "epsilon"}, "member.fgm");
            read(f, "enabled", m.fgm.enabled);
            read(f, "epsilon", m.fgm.epsilon);
        }
        if (j.contains("msd")) {
            const auto& d = j.at("msd");
            check_keys(d, {"k", "p"}, "member.msd");
            read(d, "k", m.msd.k);
            read(d, "p", m.msd.p);
        }
        if (j.contains("dims")) {
            const auto& d = j.at("dims");
            check_keys(d, {"d", "heads", "ffn", "conv_filters", "conv_width"}, "member.dims");
            read(d, "d", m.dims.d);
            read(d, "heads", m.dims.heads);
            read(d, "ffn", m.dims.ffn);
            read(d, "conv_filters", m.dims.conv_filters);
            read(d, "conv_width", m.dims.conv_width);
        }
        read(j, "seed", m.seed);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("member config: ") + e.what());
    }
    m.validate();
    return m;
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("TWEETSIFT_SEED");
    if (!s || !*s) return std::nullopt;
    char* end = nullptr;
    const auto v = std::strtoull(s, &end, 10);
    if (*end != '\0') throw UsageError(std::string("TWEETSIFT_SEED is not an integer: ") + s);
    return static_cast<std::uint64_t>(v);
}

Json RunConfig::to_json() const {
    Json j;
    j["train"] = train.string();
    j["dev"] = dev.string();
    j["test"] = test.string();
    j["output_dir"] = output_dir.string();
    j["seed"] = seed;
    j["lr_scale"] = lr_scale;
    j["vocab"] = {{"min_freq", vocab.min_freq}, {"max_size", vocab.max_size}};
    j["cv"] = {{"enabled", cv.enabled}, {"k", cv.k}};
    j["pseudo"] = {{"enabled", pseudo.enabled},
                   {"hi", pseudo.thresholds.hi},
                   {"lo", pseudo.thresholds.lo},
                   {"grid_search", pseudo.grid_search},
                   {"cv_with_pseudo", pseudo.cv_with_pseudo}};
    j["aggregation"] = {{"rule", aggregation_name(aggregation.rule.mode)},
                        {"cutoff", aggregation.rule.cutoff},
                        {"tune", aggregation.tune}};
    j["members"] = Json::array();
    for (const auto& m : members) j["members"].push_back(member_to_json(m));
    return j;
}

RunConfig RunConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        check_keys(j, {"train", "dev", "test", "output_dir", "seed", "lr_scale", "vocab", "cv", "pseudo",
                       "aggregation", "members", "batch_size", "bucketing"},
                   "config");
        if (j.contains("train")) c.train = resolve(base_dir, j.at("train").get<std::string>());
        if (j.contains("dev")) c.dev = resolve(base_dir, j.at("dev").get<std::string>());
        if (j.contains("test")) c.test = resolve(base_dir, j.at("test").get<std::string>());
        if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        else if (auto s = env_seed()) c.seed = *s;
        read(j, "lr_scale", c.lr_scale);
        if (j.contains("vocab")) {
            const auto& v = j.at("vocab");
            check_keys(v, {"min_freq", "max_size"}, "config.vocab");
            read(v, "min_freq", c.vocab.min_freq);
            read(v, "max_size", c.vocab.max_size);
        }
        if (j.contains("cv")) {
            const auto& v = j.at("cv");
            check_keys(v, {"enabled", "k"}, "config.cv");
            read(v, "enabled", c.cv.enabled);
            read(v, "k", c.cv.k);
        }
        if (j.contains("pseudo")) {
            const auto& v = j.at("pseudo");
            check_keys(v, {"enabled", "hi", "lo", "grid_search", "cv_with_pseudo"}, "config.pseudo");
            read(v, "enabled", c.pseudo.enabled);
            read(v, "hi", c.pseudo.thresholds.hi);
            read(v, "lo", c.pseudo.thresholds.lo);
            read(v, "grid_search", c.pseudo.grid_search);
            read(v, "cv_with_pseudo", c.pseudo.cv_with_pseudo);
        }
        if (j.contains("aggregation")) {
            const auto& v = j.at("aggregation");
            check_keys(v, {"rule", "cutoff", "tune"}, "config.aggregation");
            if (v.contains("rule")) c.aggregation.rule.mode = parse_aggregation(v.at("rule").get<std::string>());
            read(v, "cutoff", c.aggregation.rule.cutoff);
            read(v, "tune", c.aggregation.tune);
        }

        const auto defaults = default_members(c.seed);
        if (j.contains("members")) {
            c.members.clear();
            for (const auto& mj : j.at("members")) {
                MemberConfig base = defaults.front();
                if (mj.contains("name"))
                    for (const auto& d : defaults)
                        if (d.name == mj.at("name").get<std::string>()) base = d;
                if (!mj.contains("seed") && mj.contains("name"))
                    base.seed = derive_seed(c.seed, {fnv1a(mj.at("name").get<std::string>())});
                c.members.push_back(member_from_json(mj, base));
            }
        } else {
            c.members = defaults;
        }
        for (auto& m : c.members) {
            if (j.contains("batch_size")) m.batch_size = j.at("batch_size").get<std::size_t>();
            if (j.contains("bucketing")) m.bucketing = parse_batch_mode(j.at("bucketing").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

std::vector<MemberConfig> RunConfig::effective_members() const {
    auto out = members;
    for (auto& m : out) m.optimizer.lr *= lr_scale;
    return out;
}

void RunConfig::validate() const {
    if (!(lr_scale > 0.0)) throw UsageError("config: lr_scale must be > 0");
    if (members.empty()) throw UsageError("config: at least one member required");
    std::set<std::string> names;
    for (const auto& m : members) {
        m.validate();
        if (!names.insert(m.name).second) throw UsageError("config: duplicate member name '" + m.name + "'");
    }
    if (cv.k < 2) throw UsageError("config: cv.k must be >= 2");
    const auto& t = pseudo.thresholds;
    if (!(t.lo >= 0.0 && t.lo < t.hi && t.hi <= 1.0)) throw UsageError("config: pseudo thresholds need 0 <= lo < hi <= 1");
    validate_rule(aggregation.rule, members.size());
}

}  // namespace tweetsift
