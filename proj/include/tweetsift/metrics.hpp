#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "tweetsift/corpus.hpp"

namespace tweetsift {

// Positive class is INFORMATIVE.
struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct PrfScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

ConfusionMatrix confusion(std::span<const Label> pred, std::span<const Label> gold);

PrfScores prf(const ConfusionMatrix& cm) noexcept;
// Harmonic mean with the 0 convention when precision + recall == 0.
double f1_from(double precision, double recall) noexcept;

struct DistributionReport {
    double train_pos_ratio = 0.0;
    double pred_pos_ratio = 0.0;
    double abs_gap = 0.0;
};

double positive_ratio(std::span<const Label> labels);
DistributionReport distribution_report(const Dataset& train, std::span<const Label> predicted);
DistributionReport distribution_report(double train_pos_ratio, std::span<const Label> predicted);

// 4-decimal rounding used for every reported score.
double round4(double x) noexcept;

// {"precision", "recall", "f1", "confusion": {...}, "distribution": {...}}
std::string metrics_json(const ConfusionMatrix& cm, const DistributionReport* dist = nullptr);

}  // namespace tweetsift
