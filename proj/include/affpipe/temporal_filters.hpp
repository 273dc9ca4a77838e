#pragma once

// Windowed smoothing of per-frame score vectors. Windows are defined on true
// frame indices: the output at frame t averages every input frame t_i with
// |t_i - t| <= k. Windows are truncated at track ends and across gaps; no
// frames are ever invented.

#include <cstddef>
#include <span>
#include <vector>

#include "affpipe/datamodel.hpp"

namespace affpipe {

enum class FilterKind { Box, Gaussian };

struct FilterSpec {
    FilterKind kind = FilterKind::Box;
    int half_width = 0;     // k; 0 is the identity
    double variance = 1.0;  // sigma^2, Gaussian only

    static FilterSpec identity() { return {}; }
    static FilterSpec box(int k) { return {FilterKind::Box, k, 1.0}; }
    static FilterSpec gaussian(int k, double variance) { return {FilterKind::Gaussian, k, variance}; }
    // Gaussian with k = ceil(3 * sigma).
    static FilterSpec gaussian(double variance);

    bool is_identity() const;
    void validate() const;
};

// Half-width that covers three standard deviations.
int default_half_width(double variance);

// Row-major sequence of `dim`-vectors indexed by strictly increasing frames.
struct ScoreSeries {
    std::vector<FrameIndex> frames;
    std::size_t dim = 0;
    std::vector<double> values;

    ScoreSeries() = default;
    ScoreSeries(std::vector<FrameIndex> f, std::size_t d);

    std::size_t size() const { return frames.size(); }
    std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

ScoreSeries box_smooth(const ScoreSeries& input, int half_width);

// Variances at or below 1e-12 return the input unchanged.
ScoreSeries gaussian_smooth(const ScoreSeries& input, int half_width, double variance);

ScoreSeries smooth(const ScoreSeries& input, const FilterSpec& spec);

struct TaskFilters {
    FilterSpec va;
    FilterSpec expr;
    FilterSpec au;  // usually the identity
};

// Smooths each task's vectors independently, then renormalizes the
// expression distribution.
PredictionTrack smooth_predictions(const PredictionTrack& track, const TaskFilters& filters);
PredictionTable smooth_predictions(const PredictionTable& table, const TaskFilters& filters);

}  // namespace affpipe
