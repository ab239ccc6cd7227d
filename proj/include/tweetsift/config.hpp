#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <vector>

#include "tweetsift/ensemble.hpp"
#include "tweetsift/training.hpp"

namespace tweetsift {

using Json = nlohmann::ordered_json;

Json member_to_json(const MemberConfig& m);
// Keys absent from `j` keep the value from `defaults`; unknown keys throw.
MemberConfig member_from_json(const Json& j, const MemberConfig& defaults);

struct VocabSettings {
    int min_freq = 1;
    int max_size = 20000;
};

struct CvSettings {
    bool enabled = true;
    int k = 5;
};

struct PseudoSettings {
    bool enabled = true;
    PseudoThresholds thresholds;
    bool grid_search = false;     // pick (hi, lo) from a fixed grid by dev F1
    bool cv_with_pseudo = false;  // re-run CV with pseudo examples in the training folds
};

struct AggregationSettings {
    AggregationRule rule;
    bool tune = false;  // choose the cutoff on dev instead of using rule.cutoff
};

struct RunConfig {
    std::filesystem::path train;
    std::filesystem::path dev;
    std::filesystem::path test;
    std::filesystem::path output_dir = "tweetsift_out";
    std::uint64_t seed = 13;
    // Multiplies every member learning rate; the tabled rates are fine-tuning
    // rates for pretrained encoders and far too small for models trained from
    // random initialisation.
    double lr_scale = 1.0;
    VocabSettings vocab;
    std::vector<MemberConfig> members = default_members(13);
    CvSettings cv;
    PseudoSettings pseudo;
    AggregationSettings aggregation;

    Json to_json() const;
    // Relative paths resolve against base_dir. When "seed" is absent the
    // TWEETSIFT_SEED environment variable is used, then 13.
    static RunConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);

    // Members with lr_scale applied.
    std::vector<MemberConfig> effective_members() const;
    void validate() const;
};

std::optional<std::uint64_t> env_seed();

}  // namespace tweetsift
