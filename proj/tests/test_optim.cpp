#include <doctest.h>

#include <cmath>

#include "tweetsift/error.hpp"
#include "tweetsift/model.hpp"
#include "tweetsift/optim.hpp"
#include "tweetsift/rng.hpp"

using namespace tweetsift;

namespace {

ModelParams scalar_model(double value) {
    ModelParams p;
    p.weights.head_b = Tensor(1, 1, value);
    return p;
}

Gradients scalar_grad(double g) {
    Gradients w;
    w.head_b = Tensor(1, 1, g);
    return w;
}

ModelDims tiny_dims() {
    ModelDims d;
    d.vocab_size = 12;
    d.max_len = 6;
    d.d = 4;
    d.heads = 2;
    d.ffn = 6;
    d.conv_filters = 4;
    d.conv_width = 3;
    return d;
}

struct Problem {
    std::vector<EncodedExample> ex;
    Batch batch;
    std::vector<Label> targets;
};

Problem random_problem(Rng& rng, std::size_t n, const ModelDims& dims) {
    Problem pr;
    for (std::size_t i = 0; i < n; ++i) {
        EncodedExample e;
        e.ids.assign(dims.max_len, Vocab::pad_id);
        e.mask.assign(dims.max_len, 0);
        e.true_len = 1 + rng.below(dims.max_len);
        for (std::size_t t = 0; t < e.true_len; ++t) {
            e.ids[t] = 2 + static_cast<int>(rng.below(dims.vocab_size - 2));
            e.mask[t] = 1;
        }
        pr.ex.push_back(e);
        pr.targets.push_back(rng.below(2) ? Label::Informative : Label::Uninformative);
    }
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    pr.batch = make_batch(pr.ex, rows);
    return pr;
}

double max_abs_diff(const Weights& a, const Weights& b) {
    std::vector<const Tensor*> ta, tb;
    a.visit([&](std::string_view, const Tensor& t) { ta.push_back(&t); });
    b.visit([&](std::string_view, const Tensor& t) { tb.push_back(&t); });
    double m = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i)
        for (std::size_t j = 0; j < ta[i]->size(); ++j)
            m = std::max(m, std::abs(ta[i]->flat()[j] - tb[i]->flat()[j]));
    return m;
}

}  // namespace

TEST_CASE("zero gradients with fresh state leave Adam params unchanged") {
    auto p = scalar_model(0.37);
    auto st = AdamState::for_params(p);
    OptimizerConfig cfg;
    apply_step(cfg, st, p, scalar_grad(0.0), 1e-3);
    CHECK(p.weights.head_b(0, 0) == 0.37);
    CHECK(st.t == 1);
}

TEST_CASE("AdamW with zero gradient applies the decay term only") {
    auto p = scalar_model(1.0);
    auto st = AdamState::for_params(p);
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::AdamW;
    cfg.weight_decay = 0.01;
    apply_step(cfg, st, p, scalar_grad(0.0), 0.01);
    CHECK(p.weights.head_b(0, 0) == doctest::Approx(0.9999).epsilon(1e-15));
}

TEST_CASE("first Adam step matches a hand-computed bias-corrected update") {
    const double g = 0.5, lr = 2e-5, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double m = (1 - b1) * g, v = (1 - b2) * g * g;
    const double expected = -lr * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + eps);

    auto p = scalar_model(0.0);
    auto st = AdamState::for_params(p);
    apply_step(OptimizerConfig{}, st, p, scalar_grad(g), lr);
    CHECK(p.weights.head_b(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(p.weights.head_b(0, 0) + 2e-5) < 1e-11);
}

TEST_CASE("second Adam step follows the recurrence") {
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0, v = 0, x = 0.2;
    auto p = scalar_model(x);
    auto st = AdamState::for_params(p);
    const double gs[] = {0.3, -1.7};
    for (int t = 1; t <= 2; ++t) {
        const double g = gs[t - 1];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
        apply_step(OptimizerConfig{}, st, p, scalar_grad(g), lr);
    }
    CHECK(p.weights.head_b(0, 0) == doctest::Approx(x).epsilon(1e-14));
    CHECK(st.t == 2);
}

TEST_CASE("first-step magnitude is bounded by lr whatever the gradient scale") {
    for (double scale : {1e-8, 1e-3, 1.0, 1e3, 1e8}) {
        auto p = scalar_model(0.0);
        auto st = AdamState::for_params(p);
        apply_step(OptimizerConfig{}, st, p, scalar_grad(scale), 1e-3);
        CHECK(std::abs(p.weights.head_b(0, 0)) <= 1e-3 * (1 + 1e-9));
    }
}

TEST_CASE("non-finite gradients raise NumericError and leave state alone") {
    auto p = scalar_model(1.0);
    auto st = AdamState::for_params(p);
    CHECK_THROWS_AS(apply_step(OptimizerConfig{}, st, p, scalar_grad(std::nan("")), 1e-3), NumericError);
    CHECK_THROWS_AS(apply_step(OptimizerConfig{}, st, p, scalar_grad(INFINITY), 1e-3), NumericError);
    CHECK(st.t == 0);
    CHECK(p.weights.head_b(0, 0) == 1.0);
}

TEST_CASE("optimizer config validation") {
    OptimizerConfig c;
    c.lr = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c.lr = 1e-3;
    c.weight_decay = 1.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c.weight_decay = 0.0;
    CHECK_NOTHROW(c.validate());
    CHECK(parse_optimizer(optimizer_name(OptimizerKind::AdamW)) == OptimizerKind::AdamW);
    CHECK_THROWS_AS(parse_optimizer("SGD"), UsageError);
}

TEST_CASE("cosine schedule hits lr_max, midpoint and lr_min within a cycle") {
    LrSchedule s;
    s.kind = ScheduleKind::CosineRestart;
    s.lr_max = 3e-6;
    s.lr_min = 1e-7;
    s.cycle_len = 11;
    CHECK(lr_at(s, 0) == doctest::Approx(3e-6).epsilon(1e-14));
    CHECK(lr_at(s, 5) == doctest::Approx((3e-6 + 1e-7) / 2).epsilon(1e-12));
    CHECK(lr_at(s, 10) == doctest::Approx(1e-7).epsilon(1e-12));
    CHECK(lr_at(s, 11) == lr_at(s, 0));
    CHECK(lr_at(s, 27) == lr_at(s, 5));
}

TEST_CASE("cycle_mult stretches later cycles") {
    LrSchedule s;
    s.kind = ScheduleKind::CosineRestart;
    s.lr_max = 1.0;
    s.cycle_len = 3;
    s.cycle_mult = 2.0;
    // cycles: steps [0,3), [3,9), [9,21)
    CHECK(lr_at(s, 2) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(lr_at(s, 3) == 1.0);
    CHECK(lr_at(s, 8) == doctest::Approx(0.0));
    CHECK(lr_at(s, 9) == 1.0);
    CHECK(lr_at(s, 20) == doctest::Approx(0.0));
    CHECK(lr_at(s, 21) == 1.0);
}

TEST_CASE("schedule stays within bounds, decreases within cycles and restarts at boundaries") {
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        LrSchedule s;
        s.kind = ScheduleKind::CosineRestart;
        s.lr_max = 1e-3 * (1 + rng.uniform());
        s.lr_min = s.lr_max * rng.uniform() * 0.5;
        s.cycle_len = 1 + static_cast<std::int64_t>(rng.below(40));
        s.cycle_mult = 1.0 + rng.uniform();
        for (int i = 0; i < 5000; ++i) {
            const auto step = static_cast<std::int64_t>(rng.below(1'000'000));
            const double lr = lr_at(s, step);
            REQUIRE(lr >= s.lr_min);
            REQUIRE(lr <= s.lr_max);
        }
        // walk the first few cycles: monotone non-increasing inside, jump back to lr_max at a restart
        double prev = lr_at(s, 0);
        CHECK(prev == s.lr_max);
        for (std::int64_t step = 1; step < 400; ++step) {
            const double lr = lr_at(s, step);
            if (lr > prev) CHECK(lr == s.lr_max);
            prev = lr;
        }
    }
    LrSchedule c;
    c.lr_max = 2e-5;
    CHECK(lr_at(c, 0) == 2e-5);
    CHECK(lr_at(c, 123456) == 2e-5);
    CHECK_THROWS_AS(lr_at(c, -1), UsageError);
}

TEST_CASE("fgm perturbation of (3,4) is (0.6,0.8)") {
    Tensor g(1, 2);
    g(0, 0) = 3;
    g(0, 1) = 4;
    const auto r = fgm_perturbation(g, 1.0);
    CHECK(r(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(r(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("fgm zero-gradient guard") {
    const auto r = fgm_perturbation(Tensor(5, 3), 1.0);
    for (double x : r.flat()) CHECK(x == 0.0);
}

TEST_CASE("fgm perturbation norm equals epsilon and is parallel to the gradient") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor g(1 + rng.below(20), 1 + rng.below(10));
        for (auto& x : g.flat()) x = rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-6, 6));
        const double eps = trial % 2 ? 2.5 : rng.uniform(1e-3, 10);
        const auto r = fgm_perturbation(g, eps);
        CHECK(std::abs(l2_norm(r.flat()) - eps) < 1e-9);
        const double cos = dot(r.flat(), g.flat()) / (l2_norm(r.flat()) * l2_norm(g.flat()));
        CHECK(cos == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fgm step restores the embedding table exactly") {
    Rng rng(8);
    const auto dims = tiny_dims();
    for (auto v : {EncoderVariant::Bag, EncoderVariant::Xformer, EncoderVariant::Conv}) {
        auto params = init_params(v, dims, 21, 0.3);
        // sentinel values that any leftover perturbation would disturb
        for (std::size_t i = 0; i < params.weights.embedding.size(); ++i)
            params.weights.embedding.flat()[i] = 0.125 * static_cast<double>(i % 7) - 0.375;
        const Tensor before = params.weights.embedding;
        auto st = AdamState::for_params(params);
        const auto pr = random_problem(rng, 6, dims);
        FgmConfig fgm{true, 5.0};
        OptimizerConfig opt;
        // lr = 0 means the only possible change to the table is a leftover r
        const auto losses = fgm_training_step(params, st, pr.batch, pr.targets, {5, 0.5}, ForwardMode::training(3),
                                              fgm, opt, 0.0);
        CHECK(params.weights.embedding == before);
        CHECK(losses.adversarial != losses.clean);
        CHECK(st.t == 1);
    }
}

TEST_CASE("epsilon near zero equals a plain step on doubled gradients") {
    Rng rng(13);
    const auto dims = tiny_dims();
    for (auto v : {EncoderVariant::Bag, EncoderVariant::Xformer, EncoderVariant::Conv}) {
        const auto start = init_params(v, dims, 31, 0.3);
        const auto pr = random_problem(rng, 5, dims);
        const MsdConfig msd{5, 0.5};
        const auto mode = ForwardMode::training(17);
        OptimizerConfig opt;
        opt.kind = OptimizerKind::AdamW;

        auto a = start;
        auto sa = AdamState::for_params(a);
        const auto losses = fgm_training_step(a, sa, pr.batch, pr.targets, msd, mode, {true, 1e-12}, opt, 1e-2);
        CHECK(std::abs(losses.adversarial - losses.clean) < 1e-9);

        auto b = start;
        auto sb = AdamState::for_params(b);
        auto lg = backward(b, pr.batch, pr.targets, msd, mode);
        lg.grads.visit([](std::string_view, Tensor& t) {
            for (auto& x : t.flat()) x *= 2.0;
        });
        apply_step(opt, sb, b, lg.grads, 1e-2);
        CHECK(max_abs_diff(a.weights, b.weights) < 1e-9);
    }
}

TEST_CASE("fgm with epsilon 1e-3 raises the loss in at least 95% of trials") {
    Rng rng(2024);
    const auto dims = tiny_dims();
    int raised = 0;
    const int trials = 200;
    const EncoderVariant variants[] = {EncoderVariant::Bag, EncoderVariant::Xformer, EncoderVariant::Conv};
    for (int t = 0; t < trials; ++t) {
        auto params = init_params(variants[t % 3], dims, 1000 + static_cast<std::uint64_t>(t), 0.5);
        auto st = AdamState::for_params(params);
        const auto pr = random_problem(rng, 8, dims);
        const auto losses = fgm_training_step(params, st, pr.batch, pr.targets, {5, 0.5},
                                              ForwardMode::training(static_cast<std::uint64_t>(t)), {true, 1e-3},
                                              OptimizerConfig{}, 1e-3);
        raised += losses.adversarial >= losses.clean;
    }
    CHECK(raised >= 190);
}
