#pragma once

// Hard decisions for action-unit scores: fixed per-AU thresholds and a
// per-AU grid search maximizing binary F1 on labeled frames.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "affpipe/datamodel.hpp"

namespace affpipe {

using AuDecisions = std::array<std::uint8_t, kNumAu>;
using AuScores = std::array<double, kNumAu>;

class AuThresholds {
public:
    // All thresholds 0.5.
    AuThresholds();
    // Throws Validation unless every value lies strictly inside (0, 1).
    explicit AuThresholds(const std::array<double, kNumAu>& values);

    static AuThresholds uniform(double t);

    double operator[](std::size_t i) const { return values_[i]; }
    const std::array<double, kNumAu>& values() const { return values_; }

    bool operator==(const AuThresholds&) const = default;

private:
    std::array<double, kNumAu> values_;
};

// decision_i = 1 iff score_i >= threshold_i
AuDecisions apply_thresholds(const AuScores& scores, const AuThresholds& thresholds);

std::vector<double> default_threshold_grid();  // 0.1, 0.2, ..., 0.9

struct ThresholdTuning {
    AuThresholds thresholds;
    std::array<double, kNumAu> f1{};           // F1 at the selected threshold
    std::array<bool, kNumAu> degenerate{};     // AU lacked a positive or a negative label
    double mean_f1() const;
};

// Independent per-AU search; ties go to the smaller threshold. An AU with no
// positive or no negative label keeps 0.5 and is flagged.
ThresholdTuning tune_thresholds(std::span<const AuScores> scores, std::span<const AuLabels> labels,
                                std::span<const double> grid);

// F1 of one AU for one threshold, over labeled frames only.
double au_f1_at(std::span<const AuScores> scores, std::span<const AuLabels> labels, std::size_t au,
                double threshold);

// Text file: one "au<id> <threshold>" line per AU, in AU order.
void save_thresholds(const std::filesystem::path& path, const AuThresholds& thresholds);
AuThresholds load_thresholds(const std::filesystem::path& path);

}  // namespace affpipe
