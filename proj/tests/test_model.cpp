#include <doctest.h>

#include <cmath>
#include <thread>

#include "oracles.hpp"
#include "tweetsift/error.hpp"
#include "tweetsift/model.hpp"
#include "tweetsift/optim.hpp"
#include "tweetsift/rng.hpp"

using namespace tweetsift;

namespace {

const EncoderVariant all_variants[] = {EncoderVariant::Bag, EncoderVariant::Xformer, EncoderVariant::Conv};

ModelDims small_dims() {
    ModelDims d;
    d.vocab_size = 20;
    d.max_len = 7;
    d.d = 8;
    d.heads = 2;
    d.ffn = 12;
    d.conv_filters = 6;
    d.conv_width = 3;
    return d;
}

std::vector<EncodedExample> random_examples(Rng& rng, std::size_t n, std::size_t vocab, std::size_t max_len,
                                            std::size_t min_len = 0) {
    std::vector<EncodedExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> toks;
        const auto len = min_len + rng.below(max_len - min_len + 1);
        EncodedExample e;
        e.ids.assign(max_len, Vocab::pad_id);
        e.mask.assign(max_len, 0);
        e.true_len = len;
        for (std::size_t t = 0; t < len; ++t) {
            e.ids[t] = static_cast<int>(rng.below(vocab));
            e.mask[t] = 1;
        }
        out.push_back(e);
    }
    return out;
}

Batch whole(const std::vector<EncodedExample>& ex) {
    std::vector<std::size_t> rows(ex.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return make_batch(ex, rows);
}

std::vector<Label> random_targets(Rng& rng, std::size_t n) {
    std::vector<Label> t(n);
    for (auto& x : t) x = rng.below(2) ? Label::Informative : Label::Uninformative;
    return t;
}

}  // namespace

TEST_CASE("all-zero parameters give probability 0.5 exactly") {
    Rng rng(1);
    for (auto v : all_variants) {
        auto params = init_params(v, small_dims(), 3);
        params.weights.visit([](std::string_view, Tensor& t) { t.fill(0.0); });
        const auto ex = random_examples(rng, 6, 20, 7);
        for (double p : forward(params, whole(ex), {}, ForwardMode::eval())) CHECK(p == 0.5);
    }
}

TEST_CASE("p = 0 in TRAIN mode is bitwise EVAL") {
    Rng rng(2);
    for (auto v : all_variants) {
        const auto params = init_params(v, small_dims(), 4, 0.5);
        const auto b = whole(random_examples(rng, 9, 20, 7));
        const auto eval = forward(params, b, {5, 0.0}, ForwardMode::eval());
        const auto train = forward(params, b, {5, 0.0}, ForwardMode::training(123));
        CHECK(eval == train);
    }
}

TEST_CASE("seeded dropout is deterministic; different seeds differ") {
    Rng rng(3);
    for (auto v : all_variants) {
        const auto params = init_params(v, small_dims(), 5, 0.5);
        const auto b = whole(random_examples(rng, 9, 20, 7, 1));
        const MsdConfig msd{1, 0.5};
        CHECK(forward(params, b, msd, ForwardMode::training(9)) == forward(params, b, msd, ForwardMode::training(9)));
        CHECK(forward(params, b, msd, ForwardMode::training(9)) != forward(params, b, msd, ForwardMode::training(10)));
    }
}

TEST_CASE("EVAL is independent of msd settings") {
    Rng rng(4);
    const auto params = init_params(EncoderVariant::Xformer, small_dims(), 6, 0.5);
    const auto b = whole(random_examples(rng, 5, 20, 7));
    CHECK(forward(params, b, {1, 0.0}, ForwardMode::eval()) == forward(params, b, {7, 0.9}, ForwardMode::eval()));
}

TEST_CASE("empty sequences pool to zero: probability is sigmoid(bias)") {
    for (auto v : all_variants) {
        auto params = init_params(v, small_dims(), 7, 0.5);
        std::vector<EncodedExample> ex(1);
        ex[0].ids.assign(7, 0);
        ex[0].mask.assign(7, 0);
        const auto p = forward(params, whole(ex), {}, ForwardMode::eval());
        CHECK(p[0] == sigmoid(params.weights.head_b(0, 0)));
    }
}

TEST_CASE("bce examples") {
    CHECK(bce_loss(0.5, Label::Informative) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bce_loss(1.0, Label::Informative) == doctest::Approx(0.0).epsilon(1e-11));
    CHECK(std::isfinite(bce_loss(0.0, Label::Informative)));
    CHECK(bce_loss(0.0, Label::Informative) == doctest::Approx(-std::log(1e-12)));
    for (double p = 0.01; p < 1.0; p += 0.01)
        CHECK(bce_loss(p, Label::Uninformative) == doctest::Approx(bce_loss(1.0 - p, Label::Informative)).epsilon(1e-9));
}

TEST_CASE("sigmoid is stable at the extremes") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(std::isfinite(sigmoid(-1e308)));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(11);
    const double h = 1e-4;
    for (auto v : all_variants) {
        for (bool train : {false, true}) {
            auto params = init_params(v, small_dims(), 100 + static_cast<int>(v), 0.5);
            const auto ex = random_examples(rng, 5, 20, 7, 1);
            const auto b = whole(ex);
            const auto targets = random_targets(rng, ex.size());
            const MsdConfig msd{5, train ? 0.5 : 0.0};
            const auto mode = train ? ForwardMode::training(77) : ForwardMode::eval();
            const auto lg = backward(params, b, targets, msd, mode);
            CHECK(lg.loss == doctest::Approx(oracle::mean_bce(forward(params, b, msd, mode), targets)).epsilon(1e-12));

            double worst = 0.0;
            std::string worst_name;
            std::size_t checked = 0;
            auto grads = lg.grads;
            params.weights.visit([&](std::string_view name, Tensor& t) {
                Tensor* g = nullptr;
                grads.visit([&](std::string_view gname, Tensor& gt) {
                    if (gname == name) g = &gt;
                });
                for (std::size_t i = 0; i < t.size(); ++i) {
                    const double num = oracle::central_difference(params, t.flat()[i], b, targets, msd, mode, h);
                    const double ana = g->flat()[i];
                    const double rel = std::abs(ana - num) / std::max(std::abs(ana) + std::abs(num), 1e-7);
                    if (rel > worst) {
                        worst = rel;
                        worst_name = std::string(name) + "[" + std::to_string(i) + "]";
                    }
                    ++checked;
                }
            });
            INFO(variant_name(v) << (train ? " TRAIN" : " EVAL") << " worst at " << worst_name);
            CHECK(checked == params.weights.parameter_count());
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("backward rejects an empty batch") {
    const auto params = init_params(EncoderVariant::Bag, small_dims(), 1);
    Batch empty;
    CHECK_THROWS_AS(backward(params, empty, {}, {}, ForwardMode::eval()), DataError);
    CHECK_THROWS_AS(forward(params, empty, {}, ForwardMode::eval()), DataError);
}

TEST_CASE("non-finite loss names the offending example") {
    Rng rng(12);
    auto params = init_params(EncoderVariant::Bag, small_dims(), 1);
    params.weights.head_b(0, 0) = std::numeric_limits<double>::quiet_NaN();
    const auto ex = random_examples(rng, 3, 20, 7, 1);
    try {
        backward(params, whole(ex), random_targets(rng, 3), {}, ForwardMode::eval());
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("index 0") != std::string::npos);
    }
}

TEST_CASE("duplicating every example leaves loss and gradients unchanged") {
    Rng rng(13);
    for (auto v : all_variants) {
        const auto params = init_params(v, small_dims(), 8, 0.5);
        auto ex = random_examples(rng, 4, 20, 7, 1);
        auto targets = random_targets(rng, 4);
        const auto once = backward(params, whole(ex), targets, {}, ForwardMode::eval());
        auto ex2 = ex;
        ex2.insert(ex2.end(), ex.begin(), ex.end());
        auto t2 = targets;
        t2.insert(t2.end(), targets.begin(), targets.end());
        const auto twice = backward(params, whole(ex2), t2, {}, ForwardMode::eval());
        CHECK(twice.loss == doctest::Approx(once.loss).epsilon(1e-12));
        std::vector<double> a, b;
        once.grads.visit([&](std::string_view, const Tensor& t) { a.insert(a.end(), t.flat().begin(), t.flat().end()); });
        twice.grads.visit([&](std::string_view, const Tensor& t) { b.insert(b.end(), t.flat().begin(), t.flat().end()); });
        REQUIRE(a.size() == b.size());
        double scale = 0.0;
        for (double x : a) scale = std::max(scale, std::abs(x));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b[i] - a[i]) <= 1e-12 * scale);
    }
}

TEST_CASE("padding beyond true_len never changes an output") {
    Rng rng(14);
    for (auto v : all_variants) {
        const auto params = init_params(v, small_dims(), 9, 0.5);
        for (int trial = 0; trial < 50; ++trial) {
            auto ex = random_examples(rng, 1, 20, 6, 0);
            const auto alone = forward(params, whole(ex), {}, ForwardMode::eval());
            EncodedExample longer;
            longer.true_len = 7;
            longer.ids.assign(7, 3);
            longer.mask.assign(7, 1);
            ex.push_back(longer);
            const auto padded = forward(params, whole(ex), {}, ForwardMode::eval());
            CHECK(padded[0] == alone[0]);
        }
    }
}

TEST_CASE("masked attention") {
    Rng rng(15);
    Tensor q(3, 4), k(5, 4), v(5, 2);
    for (auto* t : {&q, &k, &v})
        for (auto& x : t->flat()) x = rng.uniform(-1, 1);

    const std::vector<int> mask{1, 0, 1, 1, 0};
    const auto r = attention_forward(q, k, v, mask);
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 5; ++j) s += r.weights(i, j);
        CHECK(std::abs(s - 1.0) < 1e-12);
        CHECK(r.weights(i, 1) == 0.0);
        CHECK(r.weights(i, 4) == 0.0);
    }

    const std::vector<int> single{0, 0, 1, 0, 0};
    const auto one = attention_forward(q, k, v, single);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(one.output(i, 0) == doctest::Approx(v(2, 0)).epsilon(1e-15));
        CHECK(one.output(i, 1) == doctest::Approx(v(2, 1)).epsilon(1e-15));
    }

    Tensor same(5, 4, 0.3);
    const auto uni = attention_forward(q, same, v, std::vector<int>(5, 1));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 5; ++j) CHECK(uni.weights(i, j) == doctest::Approx(0.2).epsilon(1e-14));

    const auto none = attention_forward(q, k, v, std::vector<int>(5, 0));
    for (double x : none.output.flat()) CHECK(x == 0.0);
}

namespace {
Dataset toy_dataset(Rng& rng, std::size_t n) {
    const std::vector<std::string> words{"cases", "deaths", "pray", "safe", "the", "a", "new", "hope"};
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const auto len = rng.below(9);
        for (std::size_t t = 0; t < len; ++t) text += (t ? " " : "") + words[rng.below(words.size())];
        ds.examples.push_back({"t" + std::to_string(i), text, std::nullopt});
    }
    return ds;
}
}  // namespace

TEST_CASE("predict is independent of batch partitioning and mode") {
    Rng rng(16);
    const auto ds = toy_dataset(rng, 41);
    std::vector<std::vector<std::string>> corpus;
    for (const auto& e : ds.examples) corpus.push_back(tokenize(e.text));
    const auto vocab = build_vocab(corpus, 1, 100);
    for (auto v : all_variants) {
        auto dims = small_dims();
        dims.vocab_size = vocab.size();
        dims.max_len = 16;
        const auto params = init_params(v, dims, 10, 0.5);
        const auto p1 = predict(params, ds, vocab, PreprocStrategy::P1, 16, 1);
        const auto p16 = predict(params, ds, vocab, PreprocStrategy::P1, 16, 16);
        REQUIRE(p1.size() == ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            CHECK(std::abs(p1[i] - p16[i]) <= 1e-6);
            CHECK(p1[i] > 0.0);
            CHECK(p1[i] < 1.0);
        }

        // BUCKETED vs SEQUENTIAL batches, mapped back through Batch::index.
        std::vector<EncodedExample> enc;
        for (const auto& e : ds.examples) enc.push_back(encode(tokenize(preproc1(e.text)), vocab, 16));
        for (auto mode : {BatchMode::Bucketed, BatchMode::Sequential}) {
            std::vector<double> by_index(ds.size(), -1.0);
            for (const auto& b : bucket_batches(enc, 7, 5, mode)) {
                const auto p = forward(params, b, {}, ForwardMode::eval());
                for (std::size_t r = 0; r < b.size(); ++r) by_index[b.index[r]] = p[r];
            }
            for (std::size_t i = 0; i < ds.size(); ++i) CHECK(std::abs(by_index[i] - p1[i]) <= 1e-6);
        }

        Dataset single;
        single.examples.push_back(ds.examples[0]);
        CHECK(predict(params, single, vocab, PreprocStrategy::P1, 16).size() == 1);
    }
}

TEST_CASE("predict rejects duplicate ids and mismatched vocabularies") {
    Rng rng(17);
    auto ds = toy_dataset(rng, 3);
    const auto vocab = build_vocab({{"cases"}}, 1, 100);
    auto dims = small_dims();
    dims.vocab_size = vocab.size();
    const auto params = init_params(EncoderVariant::Bag, dims, 1);
    ds.examples[1].id = ds.examples[0].id;
    CHECK_THROWS_AS(predict(params, ds, vocab, PreprocStrategy::P1, 7), DataError);
    auto wrong = init_params(EncoderVariant::Bag, small_dims(), 1);
    CHECK_THROWS_AS(predict(wrong, toy_dataset(rng, 2), vocab, PreprocStrategy::P1, 7), DataError);
}

TEST_CASE("EVAL forward is identical across threads") {
    Rng rng(18);
    for (auto v : all_variants) {
        const auto params = init_params(v, small_dims(), 11, 0.5);
        const auto b = whole(random_examples(rng, 12, 20, 7));
        const auto ref = forward(params, b, {}, ForwardMode::eval());
        std::vector<std::vector<double>> got(6);
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < got.size(); ++t)
                pool.emplace_back([&, t] { got[t] = forward(params, b, {}, ForwardMode::eval()); });
        }
        for (const auto& g : got) CHECK(g == ref);
    }
}

TEST_CASE("initialisation is uniform(-scale, scale) and seeded") {
    for (auto v : all_variants) {
        const auto a = init_params(v, small_dims(), 21);
        const auto b = init_params(v, small_dims(), 21);
        const auto c = init_params(v, small_dims(), 22);
        CHECK(a == b);
        CHECK(!(a == c));
        a.weights.visit([](std::string_view, const Tensor& t) {
            for (double x : t.flat()) {
                CHECK(x >= -0.05);
                CHECK(x < 0.05);
            }
        });
        CHECK(a.weights.all_finite());
    }
}

TEST_CASE("variant names") {
    CHECK(parse_variant("XFORMER") == EncoderVariant::Xformer);
    CHECK(variant_name(EncoderVariant::Conv) == "CONV");
    CHECK_THROWS(parse_variant("LSTM"));
    CHECK_THROWS(MsdConfig{0, 0.5}.validate());
    CHECK_THROWS(MsdConfig{5, 1.0}.validate());
}
