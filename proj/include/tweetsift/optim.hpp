#pragma once

#include <cstdint>
#include <string_view>

#include "tweetsift/model.hpp"

namespace tweetsift {

enum class OptimizerKind { Adam, AdamW };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;  // AdamW only

    void validate() const;
};

std::string_view optimizer_name(OptimizerKind k) noexcept;
OptimizerKind parse_optimizer(std::string_view s);

enum class ScheduleKind { Constant, CosineRestart };

// Cosine annealing with warm restarts. Cycle i lasts round(cycle_len *
// cycle_mult^i) steps and runs from lr_max at its first step down to lr_min at
// its last step.
struct LrSchedule {
    ScheduleKind kind = ScheduleKind::Constant;
    double lr_max = 2e-5;
    double lr_min = 0.0;
    std::int64_t cycle_len = 1;
    double cycle_mult = 1.0;

    void validate() const;
};

std::string_view schedule_name(ScheduleKind k) noexcept;
ScheduleKind parse_schedule(std::string_view s);

double lr_at(const LrSchedule& sched, std::int64_t step);

struct AdamState {
    Weights m;
    Weights v;
    std::int64_t t = 0;

    static AdamState for_params(const ModelParams& params);
};

// One bias-corrected Adam step; AdamW first applies the decoupled decay
// p -= lr * wd * p. Throws NumericError on non-finite gradients.
void apply_step(const OptimizerConfig& cfg, AdamState& state, ModelParams& params, const Gradients& grads, double lr);

struct FgmConfig {
    bool enabled = false;
    double epsilon = 1.0;
};

// r = epsilon * g / ||g||_2 over the whole embedding gradient; zero when g is zero.
Tensor fgm_perturbation(const Tensor& embedding_grad, double epsilon);

struct StepLosses {
    double clean = 0.0;
    double adversarial = 0.0;
};

// Clean backward, perturb the embedding table, adversarial backward with the
// same dropout masks, restore the table, then one optimizer step on the sum
// of both gradients.
StepLosses fgm_training_step(ModelParams& params, AdamState& state, const Batch& batch, std::span<const Label> targets,
                             const MsdConfig& msd, ForwardMode mode, const FgmConfig& fgm, const OptimizerConfig& opt,
                             double lr);

// The same without adversarial training.
double plain_training_step(ModelParams& params, AdamState& state, const Batch& batch, std::span<const Label> targets,
                           const MsdConfig& msd, ForwardMode mode, const OptimizerConfig& opt, double lr);

}  // namespace tweetsift
