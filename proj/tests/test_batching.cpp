#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "tweetsift/batching.hpp"
#include "tweetsift/rng.hpp"

using namespace tweetsift;

namespace {

std::vector<EncodedExample> with_lengths(const std::vector<std::size_t>& lens) {
    std::vector<EncodedExample> out;
    for (auto l : lens) {
        EncodedExample e;
        e.true_len = l;
        e.ids.assign(std::max<std::size_t>(l, 1), Vocab::pad_id);
        e.mask.assign(e.ids.size(), 0);
        for (std::size_t i = 0; i < l; ++i) {
            e.ids[i] = 2 + static_cast<int>(i % 7);
            e.mask[i] = 1;
        }
        out.push_back(e);
    }
    return out;
}

std::vector<std::size_t> all_indices(const std::vector<Batch>& batches) {
    std::vector<std::size_t> idx;
    for (const auto& b : batches) idx.insert(idx.end(), b.index.begin(), b.index.end());
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Oracle: cheapest way to split the examples into groups of the given sizes,
// by trying every permutation.
std::size_t brute_min_pad(std::vector<std::size_t> lens, std::size_t bs) {
    std::sort(lens.begin(), lens.end());
    std::size_t best = std::numeric_limits<std::size_t>::max();
    do {
        std::size_t pad = 0;
        for (std::size_t s = 0; s < lens.size(); s += bs) {
            const std::size_t e = std::min(lens.size(), s + bs);
            const auto mx = *std::max_element(lens.begin() + s, lens.begin() + e);
            for (std::size_t i = s; i < e; ++i) pad += mx - lens[i];
        }
        best = std::min(best, pad);
    } while (std::next_permutation(lens.begin(), lens.end()));
    return best;
}

}  // namespace

TEST_CASE("bucketing pairs similar lengths") {
    const auto ex = with_lengths({5, 100, 6, 99});
    const auto bucketed = bucket_batches(ex, 2, 1, BatchMode::Bucketed);
    REQUIRE(bucketed.size() == 2);
    for (const auto& b : bucketed) {
        std::vector<std::size_t> idx = b.index;
        std::sort(idx.begin(), idx.end());
        CHECK((idx == std::vector<std::size_t>{0, 2} || idx == std::vector<std::size_t>{1, 3}));
    }
    CHECK(padding_stats(bucketed).pad_cells == 2);
    CHECK(brute_min_pad({5, 100, 6, 99}, 2) == 2);
    // The worst pairing puts each short sequence next to a long one.
    const auto worst = with_lengths({5, 100, 6, 99});
    CHECK(padding_stats(bucket_batches(worst, 2, 0, BatchMode::Sequential)).pad_cells == 95 + 93);
}

TEST_CASE("batch_size >= n gives a single batch") {
    const auto ex = with_lengths({3, 1, 4, 1, 5});
    for (auto mode : {BatchMode::Bucketed, BatchMode::Sequential}) {
        const auto b = bucket_batches(ex, 5, 9, mode);
        REQUIRE(b.size() == 1);
        CHECK(b[0].size() == 5);
        CHECK(b[0].length == 5);
        CHECK(bucket_batches(ex, 64, 9, mode).size() == 1);
    }
}

TEST_CASE("every example appears exactly once, every seed") {
    Rng rng(3);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::vector<std::size_t> lens(1 + rng.below(300));
        for (auto& l : lens) l = rng.below(40);
        const auto ex = with_lengths(lens);
        const std::size_t bs = 1 + rng.below(20);
        std::vector<std::size_t> expect(lens.size());
        std::iota(expect.begin(), expect.end(), std::size_t{0});
        for (auto mode : {BatchMode::Bucketed, BatchMode::Sequential}) {
            const auto batches = bucket_batches(ex, bs, seed, mode);
            CHECK(all_indices(batches) == expect);
            for (const auto& b : batches) {
                CHECK(b.size() <= bs);
                CHECK(b.length == *std::max_element(b.true_len.begin(), b.true_len.end()));
                for (std::size_t r = 0; r < b.size(); ++r) {
                    const auto row = b.tokens(r);
                    const auto& src = ex[b.index[r]];
                    for (std::size_t t = 0; t < b.length; ++t)
                        CHECK(row[t] == (t < src.true_len ? src.ids[t] : Vocab::pad_id));
                }
            }
        }
    }
}

TEST_CASE("sequential mode keeps input order") {
    const auto ex = with_lengths({4, 2, 9, 1, 1});
    const auto b = bucket_batches(ex, 2, 0, BatchMode::Sequential);
    REQUIRE(b.size() == 3);
    CHECK(b[0].index == std::vector<std::size_t>{0, 1});
    CHECK(b[1].index == std::vector<std::size_t>{2, 3});
    CHECK(b[2].index == std::vector<std::size_t>{4});
}

TEST_CASE("same seed, same batches") {
    const auto ex = with_lengths({5, 3, 8, 8, 1, 9, 2, 2, 7, 4, 6, 3});
    const auto a = bucket_batches(ex, 3, 42, BatchMode::Bucketed);
    const auto b = bucket_batches(ex, 3, 42, BatchMode::Bucketed);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].index == b[i].index);
}

TEST_CASE("padding_stats examples") {
    const auto same = with_lengths({3, 3});
    const std::vector<std::size_t> rows{0, 1};
    const std::vector<Batch> one{make_batch(same, rows)};
    CHECK(padding_stats(one).pad_cells == 0);
    const auto diff = with_lengths({1, 4});
    const std::vector<Batch> two{make_batch(diff, rows)};
    CHECK(padding_stats(two).pad_cells == 3);
    CHECK(padding_stats(two).pad_fraction == doctest::Approx(3.0 / 8.0));
}

TEST_CASE("bucketed padding never exceeds sequential on 1000 random profiles") {
    Rng rng(1000);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::size_t> lens(1 + rng.below(400));
        const std::size_t maxlen = 1 + rng.below(128);
        for (auto& l : lens) l = rng.below(maxlen + 1);
        const std::size_t bs = 1 + rng.below(32);
        const auto ex = with_lengths(lens);
        const auto b = padding_stats(bucket_batches(ex, bs, trial, BatchMode::Bucketed)).pad_cells;
        const auto s = padding_stats(bucket_batches(ex, bs, trial, BatchMode::Sequential)).pad_cells;
        INFO("trial " << trial << " n=" << lens.size() << " bs=" << bs);
        CHECK(b <= s);
    }
}

TEST_CASE("bucketed padding is optimal within a chunk (brute force)") {
    Rng rng(77);
    for (int trial = 0; trial < 150; ++trial) {
        std::vector<std::size_t> lens(1 + rng.below(8));
        for (auto& l : lens) l = rng.below(12);
        const std::size_t bs = 1 + rng.below(4);
        const auto got = padding_stats(bucket_batches(with_lengths(lens), bs, trial, BatchMode::Bucketed)).pad_cells;
        CHECK(got == brute_min_pad(lens, bs));
    }
}

TEST_CASE("batch mode names") {
    CHECK(parse_batch_mode("on") == BatchMode::Bucketed);
    CHECK(parse_batch_mode("off") == BatchMode::Sequential);
    CHECK_THROWS(parse_batch_mode("sometimes"));
    CHECK_THROWS(bucket_batches(with_lengths({1}), 0, 0, BatchMode::Bucketed));
}
