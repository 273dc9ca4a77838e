#pragma once

// Convex blending of two models' predictions, one weight per task, and a
// per-task grid search of the weights on labeled validation frames.

#include <filesystem>
#include <vector>

#include "affpipe/au_threshold.hpp"
#include "affpipe/datamodel.hpp"

namespace affpipe {

struct BlendWeights {
    double va = 0.5;
    double expr = 0.5;
    double au = 0.5;

    void validate() const;
    bool operator==(const BlendWeights&) const = default;
};

// Per task: w * first + (1 - w) * second.
PredictionSet blend(const PredictionSet& first, const PredictionSet& second, const BlendWeights& w);

// Both tables must cover identical (video_id, frame) keys.
PredictionTable blend(const PredictionTable& first, const PredictionTable& second, const BlendWeights& w);

enum class BlendTask { Va, Expr, Au };

struct BlendTuneOptions {
    double step = 0.05;
    bool tune_va = true;
    bool tune_expr = true;
    bool tune_au = true;
    AuThresholds au_thresholds;  // used for the AU metric
    BlendWeights fallback;       // weights for tasks that are not tuned
};

struct GridPoint {
    double weight;
    double metric;
};

struct BlendTuning {
    BlendWeights weights;
    std::vector<GridPoint> va_trace;    // P_VA per grid weight
    std::vector<GridPoint> expr_trace;  // macro F1
    std::vector<GridPoint> au_trace;    // mean AU F1
    double va_metric = 0.0;
    double expr_metric = 0.0;
    double au_metric = 0.0;
};

// 0, step, 2*step, ... and always 1.0.
std::vector<double> weight_grid(double step);

// Independent 1-D search per task. Ties go to the smaller weight.
BlendTuning tune_blend_weights(const PredictionTable& first, const PredictionTable& second,
                               const LabelMap& labels, const BlendTuneOptions& options = {});

// Metric used to score one task on a table; exposed for oracles and reports.
double task_metric(BlendTask task, const PredictionTable& predictions, const LabelMap& labels,
                   const AuThresholds& thresholds);

// Text report: "task weight metric" lines for va, expr, au.
void save_blend_weights(const std::filesystem::path& path, const BlendTuning& tuning);
void save_blend_weights(const std::filesystem::path& path, const BlendWeights& weights);
BlendWeights load_blend_weights(const std::filesystem::path& path);

}  // namespace affpipe
