#include "tweetsift/batching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "tweetsift/error.hpp"
#include "tweetsift/rng.hpp"

namespace tweetsift {

Batch make_batch(std::span<const EncodedExample> examples, std::span<const std::size_t> rows) {
    Batch b;
    b.index.assign(rows.begin(), rows.end());
    for (auto r : rows) b.length = std::max(b.length, examples[r].true_len);
    b.token_ids.assign(rows.size() * b.length, Vocab::pad_id);
    b.true_len.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& ex = examples[rows[i]];
        b.true_len.push_back(ex.true_len);
        std::copy_n(ex.ids.begin(), ex.true_len, b.token_ids.begin() + static_cast<std::ptrdiff_t>(i * b.length));
    }
    return b;
}

namespace {

// Cuts a length-sorted chunk into groups of batch_size plus one remainder
// group, choosing the remainder's slot that minimises sum(rows * max_len).
std::vector<std::vector<std::size_t>> cut_sorted(const std::vector<std::size_t>& sorted,
                                                 std::span<const EncodedExample> examples,
                                                 std::size_t batch_size) {
    const std::size_t n = sorted.size();
    const std::size_t full = n / batch_size;
    const std::size_t rem = n % batch_size;
    auto len_at = [&](std::size_t pos) { return examples[sorted[pos]].true_len; };

    std::size_t best_slot = full;
    if (rem != 0) {
        std::size_t best_cost = std::numeric_limits<std::size_t>::max();
        for (std::size_t slot = 0; slot <= full; ++slot) {
            std::size_t cost = 0, pos = 0;
            for (std::size_t g = 0; g <= full; ++g) {
                const std::size_t sz = (g == slot) ? rem : batch_size;
                pos += sz;
                cost += sz * len_at(pos - 1);
            }
            if (cost < best_cost) {
                best_cost = cost;
                best_slot = slot;
            }
        }
    }

    std::vector<std::vector<std::size_t>> groups;
    std::size_t pos = 0;
    const std::size_t ngroups = full + (rem != 0 ? 1 : 0);
    for (std::size_t g = 0; g < ngroups; ++g) {
        const std::size_t sz = (rem != 0 && g == best_slot) ? rem : batch_size;
        groups.emplace_back(sorted.begin() + static_cast<std::ptrdiff_t>(pos),
                            sorted.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += sz;
    }
    return groups;
}

}  // namespace

std::vector<Batch> bucket_batches(std::span<const EncodedExample> examples, std::size_t batch_size,
                                  std::uint64_t seed, BatchMode mode) {
    if (batch_size < 1) throw UsageError("bucket_batches: batch_size must be >= 1");
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Batch> out;
    if (mode == BatchMode::Sequential) {
        for (std::size_t s = 0; s < order.size(); s += batch_size) {
            const std::size_t e = std::min(order.size(), s + batch_size);
            out.push_back(make_batch(examples, std::span<const std::size_t>(order).subspan(s, e - s)));
        }
        return out;
    }

    Rng rng(derive_seed(seed, {fnv1a("bucket")}));
    rng.shuffle(order);
    const std::size_t chunk = 50 * batch_size;
    for (std::size_t s = 0; s < order.size(); s += chunk) {
        const std::size_t e = std::min(order.size(), s + chunk);
        std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(s),
                                      order.begin() + static_cast<std::ptrdiff_t>(e));
        std::stable_sort(part.begin(), part.end(), [&](std::size_t a, std::size_t b) {
            return examples[a].true_len < examples[b].true_len;
        });
        for (const auto& g : cut_sorted(part, examples, batch_size)) out.push_back(make_batch(examples, g));
    }
    rng.shuffle(out);
    return out;
}

PaddingStats padding_stats(std::span<const Batch> batches) {
    PaddingStats st;
    std::size_t real = 0;
    for (const auto& b : batches) {
        st.total_cells += b.size() * b.length;
        for (auto l : b.true_len) real += l;
    }
    st.pad_cells = st.total_cells - real;
    st.pad_fraction = st.total_cells == 0 ? 0.0 : static_cast<double>(st.pad_cells) / static_cast<double>(st.total_cells);
    return st;
}

BatchMode parse_batch_mode(std::string_view s) {
    if (s == "on" || s == "bucketed" || s == "BUCKETED") return BatchMode::Bucketed;
    if (s == "off" || s == "sequential" || s == "SEQUENTIAL") return BatchMode::Sequential;
    throw UsageError("unknown bucketing mode '" + std::string(s) + "'");
}

std::string_view batch_mode_name(BatchMode m) noexcept { return m == BatchMode::Bucketed ? "on" : "off"; }

}  // namespace tweetsift
