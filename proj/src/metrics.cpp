#include "tweetsift/metrics.hpp"

#include <cmath>
#include <json.hpp>

#include "tweetsift/error.hpp"

namespace tweetsift {

ConfusionMatrix confusion(std::span<const Label> pred, std::span<const Label> gold) {
    if (pred.size() != gold.size()) throw DataError("confusion: prediction and gold lengths differ");
    if (pred.empty()) throw DataError("confusion: no examples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == Label::Informative;
        const bool g = gold[i] == Label::Informative;
        if (p && g) ++cm.tp;
        else if (p) ++cm.fp;
        else if (g) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double f1_from(double precision, double recall) noexcept {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

PrfScores prf(const ConfusionMatrix& cm) noexcept {
    PrfScores s;
    const auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    s.precision = ratio(cm.tp, cm.tp + cm.fp);
    s.recall = ratio(cm.tp, cm.tp + cm.fn);
    s.f1 = f1_from(s.precision, s.recall);
    return s;
}

double positive_ratio(std::span<const Label> labels) {
    if (labels.empty()) throw DataError("positive_ratio: no labels");
    std::size_t pos = 0;
    for (auto l : labels) pos += l == Label::Informative;
    return static_cast<double>(pos) / static_cast<double>(labels.size());
}

DistributionReport distribution_report(double train_pos_ratio, std::span<const Label> predicted) {
    DistributionReport r;
    r.train_pos_ratio = train_pos_ratio;
    r.pred_pos_ratio = positive_ratio(predicted);
    r.abs_gap = std::abs(r.train_pos_ratio - r.pred_pos_ratio);
    return r;
}

DistributionReport distribution_report(const Dataset& train, std::span<const Label> predicted) {
    return distribution_report(class_distribution(train).positive_ratio, predicted);
}

double round4(double x) noexcept { return std::round(x * 1e4) / 1e4; }

std::string metrics_json(const ConfusionMatrix& cm, const DistributionReport* dist) {
    const auto s = prf(cm);
    nlohmann::ordered_json j;
    j["precision"] = round4(s.precision);
    j["recall"] = round4(s.recall);
    j["f1"] = round4(s.f1);
    j["confusion"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
    if (dist) {
        j["distribution"] = {{"train_pos_ratio", round4(dist->train_pos_ratio)},
                             {"pred_pos_ratio", round4(dist->pred_pos_ratio)},
                             {"abs_gap", round4(dist->abs_gap)}};
    }
    return j.dump(2);
}

}  // namespace tweetsift
