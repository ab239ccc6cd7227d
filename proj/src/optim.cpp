#include "tweetsift/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tweetsift/error.hpp"

namespace tweetsift {

void OptimizerConfig::validate() const {
    if (!(lr > 0.0)) throw UsageError("optimizer: lr must be > 0");
    if (!(weight_decay >= 0.0 && weight_decay < 1.0)) throw UsageError("optimizer: weight_decay must be in [0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw UsageError("optimizer: betas in [0, 1)");
    if (!(eps > 0.0)) throw UsageError("optimizer: eps must be > 0");
}

std::string_view optimizer_name(OptimizerKind k) noexcept { return k == OptimizerKind::Adam ? "ADAM" : "ADAMW"; }

OptimizerKind parse_optimizer(std::string_view s) {
    if (s == "ADAM") return OptimizerKind::Adam;
    if (s == "ADAMW") return OptimizerKind::AdamW;
    throw UsageError("unknown optimizer '" + std::string(s) + "'");
}

void LrSchedule::validate() const {
    if (!(lr_max > 0.0) || !(lr_min >= 0.0) || lr_min > lr_max)
        throw UsageError("schedule: need 0 <= lr_min <= lr_max, lr_max > 0");
    if (kind == ScheduleKind::CosineRestart && (cycle_len < 1 || !(cycle_mult >= 1.0)))
        throw UsageError("schedule: cycle_len >= 1 and cycle_mult >= 1 required");
}

std::string_view schedule_name(ScheduleKind k) noexcept {
    return k == ScheduleKind::Constant ? "CONSTANT" : "COSINE_RESTART";
}

ScheduleKind parse_schedule(std::string_view s) {
    if (s == "CONSTANT") return ScheduleKind::Constant;
    if (s == "COSINE_RESTART") return ScheduleKind::CosineRestart;
    throw UsageError("unknown schedule '" + std::string(s) + "'");
}

double lr_at(const LrSchedule& sched, std::int64_t step) {
    if (step < 0) throw UsageError("lr_at: step must be >= 0");
    if (sched.kind == ScheduleKind::Constant) return sched.lr_max;
    std::int64_t t_cur = step;
    double len = static_cast<double>(sched.cycle_len);
    std::int64_t cycle = std::max<std::int64_t>(1, std::llround(len));
    while (t_cur >= cycle) {
        t_cur -= cycle;
        len *= sched.cycle_mult;
        cycle = std::max<std::int64_t>(1, std::llround(len));
    }
    if (cycle == 1 || t_cur == 0) return sched.lr_max;
    const double phase = static_cast<double>(t_cur) / static_cast<double>(cycle - 1);
    const double lr = sched.lr_min + 0.5 * (sched.lr_max - sched.lr_min) * (1.0 + std::cos(std::numbers::pi * phase));
    return std::clamp(lr, sched.lr_min, sched.lr_max);
}

AdamState AdamState::for_params(const ModelParams& params) {
    return {params.weights.zeros_like(), params.weights.zeros_like(), 0};
}

namespace {

std::vector<Tensor*> tensors(Weights& w) {
    std::vector<Tensor*> out;
    w.visit([&](std::string_view, Tensor& t) { out.push_back(&t); });
    return out;
}

std::vector<const Tensor*> tensors(const Weights& w) {
    std::vector<const Tensor*> out;
    w.visit([&](std::string_view, const Tensor& t) { out.push_back(&t); });
    return out;
}

void add_into(Weights& dst, const Weights& src) {
    auto d = tensors(dst);
    auto s = tensors(src);
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto df = d[i]->flat();
        auto sf = s[i]->flat();
        for (std::size_t j = 0; j < df.size(); ++j) df[j] += sf[j];
    }
}

}  // namespace

void apply_step(const OptimizerConfig& cfg, AdamState& state, ModelParams& params, const Gradients& grads, double lr) {
    auto p = tensors(params.weights);
    auto g = tensors(grads);
    auto m = tensors(state.m);
    auto v = tensors(state.v);
    if (p.size() != g.size() || p.size() != m.size()) throw NumericError("apply_step: structure mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!p[i]->same_shape(*g[i]) || !p[i]->same_shape(*m[i]) || !p[i]->same_shape(*v[i]))
            throw NumericError("apply_step: shape mismatch");
        for (double x : g[i]->flat())
            if (!std::isfinite(x)) throw NumericError("apply_step: non-finite gradient");
    }

    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    const bool decoupled = cfg.kind == OptimizerKind::AdamW && cfg.weight_decay > 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto pf = p[i]->flat();
        auto gf = g[i]->flat();
        auto mf = m[i]->flat();
        auto vf = v[i]->flat();
        for (std::size_t j = 0; j < pf.size(); ++j) {
            if (decoupled) pf[j] -= lr * cfg.weight_decay * pf[j];
            mf[j] = cfg.beta1 * mf[j] + (1.0 - cfg.beta1) * gf[j];
            vf[j] = cfg.beta2 * vf[j] + (1.0 - cfg.beta2) * gf[j] * gf[j];
            const double mhat = mf[j] / bc1;
            const double vhat = vf[j] / bc2;
            pf[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

Tensor fgm_perturbation(const Tensor& embedding_grad, double epsilon) {
    if (!(epsilon >= 0.0)) throw UsageError("fgm: epsilon must be >= 0");
    Tensor r(embedding_grad.rows(), embedding_grad.cols());
    const double norm = l2_norm(embedding_grad.flat());
    if (norm == 0.0 || !std::isfinite(norm) || epsilon == 0.0) return r;
    const double scale = epsilon / norm;
    auto rf = r.flat();
    const auto gf = embedding_grad.flat();
    for (std::size_t i = 0; i < rf.size(); ++i) rf[i] = gf[i] * scale;
    return r;
}

StepLosses fgm_training_step(ModelParams& params, AdamState& state, const Batch& batch, std::span<const Label> targets,
                             const MsdConfig& msd, ForwardMode mode, const FgmConfig& fgm, const OptimizerConfig& opt,
                             double lr) {
    auto clean = backward(params, batch, targets, msd, mode);
    const Tensor saved = params.weights.embedding;
    const Tensor r = fgm_perturbation(clean.grads.embedding, fgm.epsilon);
    {
        auto ef = params.weights.embedding.flat();
        const auto rf = r.flat();
        for (std::size_t i = 0; i < ef.size(); ++i) ef[i] += rf[i];
    }
    LossAndGrads adv;
    try {
        adv = backward(params, batch, targets, msd, mode);
    } catch (...) {
        params.weights.embedding = saved;
        throw;
    }
    params.weights.embedding = saved;
    if (!(params.weights.embedding == saved)) throw NumericError("fgm: embedding restore mismatch");

    add_into(clean.grads, adv.grads);
    apply_step(opt, state, params, clean.grads, lr);
    return {clean.loss, adv.loss};
}

double plain_training_step(ModelParams& params, AdamState& state, const Batch& batch, std::span<const Label> targets,
                           const MsdConfig& msd, ForwardMode mode, const OptimizerConfig& opt, double lr) {
    auto lg = backward(params, batch, targets, msd, mode);
    apply_step(opt, state, params, lg.grads, lr);
    return lg.loss;
}

}  // namespace tweetsift
