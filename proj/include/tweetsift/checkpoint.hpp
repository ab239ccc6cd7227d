#pragma once

#include <filesystem>
#include <string>

#include "tweetsift/model.hpp"
#include "tweetsift/preprocess.hpp"
#include "tweetsift/training.hpp"

namespace tweetsift {

inline constexpr std::string_view checkpoint_magic = "TWSIFT1";

// Self-contained: the member config, every tensor, and the vocabulary the
// model was trained with (plus the path it was loaded from, for reference).
struct Checkpoint {
    MemberConfig config;
    ModelParams params;
    Vocab vocab;
    std::string vocab_ref;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tweetsift
