#include "tweetsift/checkpoint.hpp"

#include <fstream>

#include "tweetsift/config.hpp"
#include "tweetsift/error.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    Json j;
    j["magic"] = checkpoint_magic;
    j["config"] = member_to_json(ckpt.config);
    const auto& d = ckpt.params.dims;
    j["variant"] = variant_name(ckpt.params.variant);
    j["dims"] = {{"vocab_size", d.vocab_size}, {"max_len", d.max_len},         {"d", d.d},
                 {"heads", d.heads},           {"ffn", d.ffn},                 {"conv_filters", d.conv_filters},
                 {"conv_width", d.conv_width}};
    j["seeds"] = {{"member", ckpt.config.seed}, {"init", derive_seed(ckpt.config.seed, {fnv1a("params")})}};
    j["vocab_ref"] = ckpt.vocab_ref;
    j["vocab"] = Json::parse(ckpt.vocab.to_json());
    j["tensors"] = Json::array();
    ckpt.params.weights.visit([&](std::string_view name, const Tensor& t) {
        if (t.empty()) return;
        j["tensors"].push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"data", t.flat()}});
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    try {
        const auto j = Json::parse(in);
        if (j.value("magic", std::string{}) != checkpoint_magic)
            throw DataError(path.string() + ": not a " + std::string(checkpoint_magic) + " checkpoint");
        Checkpoint c;
        c.config = member_from_json(j.at("config"), MemberConfig{});
        c.vocab = Vocab::from_json(j.at("vocab").dump());
        c.vocab_ref = j.value("vocab_ref", std::string{});
        const auto& dj = j.at("dims");
        ModelDims dims;
        dims.vocab_size = dj.at("vocab_size").get<std::size_t>();
        dims.max_len = dj.at("max_len").get<std::size_t>();
        dims.d = dj.at("d").get<std::size_t>();
        dims.heads = dj.at("heads").get<std::size_t>();
        dims.ffn = dj.at("ffn").get<std::size_t>();
        dims.conv_filters = dj.at("conv_filters").get<std::size_t>();
        dims.conv_width = dj.at("conv_width").get<std::size_t>();
        c.params = init_params(parse_variant(j.at("variant").get<std::string>()), dims, 0);
        std::size_t filled = 0;
        c.params.weights.visit([&](std::string_view name, Tensor& t) {
            if (t.empty()) return;
            for (const auto& tj : j.at("tensors")) {
                if (tj.at("name").get<std::string>() != name) continue;
                if (tj.at("rows").get<std::size_t>() != t.rows() || tj.at("cols").get<std::size_t>() != t.cols())
                    throw DataError(path.string() + ": shape mismatch for tensor " + std::string(name));
                const auto data = tj.at("data").get<std::vector<double>>();
                if (data.size() != t.size())
                    throw DataError(path.string() + ": wrong element count for tensor " + std::string(name));
                std::copy(data.begin(), data.end(), t.flat().begin());
                ++filled;
                return;
            }
            throw DataError(path.string() + ": missing tensor " + std::string(name));
        });
        if (filled != j.at("tensors").size()) throw DataError(path.string() + ": unexpected extra tensors");
        if (c.vocab.size() != dims.vocab_size) throw DataError(path.string() + ": vocabulary size mismatch");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace tweetsift
