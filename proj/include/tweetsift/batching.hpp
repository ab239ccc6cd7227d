#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tweetsift/preprocess.hpp"

namespace tweetsift {

enum class BatchMode { Bucketed, Sequential };

// A padded mini-batch. Each row is padded only up to the longest sequence in
// the batch; `index` maps rows back to positions in the source list.
struct Batch {
    std::size_t length = 0;
    std::vector<int> token_ids;  // size() * length, row-major
    std::vector<std::size_t> true_len;
    std::vector<std::size_t> index;

    std::size_t size() const noexcept { return index.size(); }
    std::span<const int> tokens(std::size_t row) const noexcept {
        return {token_ids.data() + row * length, length};
    }
};

Batch make_batch(std::span<const EncodedExample> examples, std::span<const std::size_t> rows);

// BUCKETED: seeded shuffle, chunks of 50 * batch_size sorted by length and cut
// into batches (the short remainder batch is placed where it adds the least
// padding), then the batch order is shuffled. SEQUENTIAL: input order.
std::vector<Batch> bucket_batches(std::span<const EncodedExample> examples, std::size_t batch_size,
                                  std::uint64_t seed, BatchMode mode);

struct PaddingStats {
    std::size_t pad_cells = 0;
    std::size_t total_cells = 0;
    double pad_fraction = 0.0;
};
PaddingStats padding_stats(std::span<const Batch> batches);

BatchMode parse_batch_mode(std::string_view s);
std::string_view batch_mode_name(BatchMode m) noexcept;

}  // namespace tweetsift
