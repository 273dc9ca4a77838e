#include "affpipe/temporal_filters.hpp"

#include <algorithm>
#include <cmath>

#include "affpipe/error.hpp"

namespace affpipe {

namespace {

constexpr double kMinVariance = 1e-12;

void check_sorted(const ScoreSeries& s) {
    require(s.values.size() == s.frames.size() * s.dim, "score series: value count does not match frames x dim");
    for (std::size_t i = 1; i < s.frames.size(); ++i)
        require(s.frames[i - 1] < s.frames[i], "score series: frame indices must be strictly increasing");
}

// Normalized weighted average over |t_i - t| <= k. `weight` maps the frame
// distance to a non-negative weight, and must be positive at distance 0.
template <typename Weight>
ScoreSeries windowed_mean(const ScoreSeries& in, int half_width, Weight weight) {
    ScoreSeries out(in.frames, in.dim);
    const std::size_t n = in.size();
    std::size_t lo = 0, hi = 0;  // window is [lo, hi)
    std::vector<double> acc(in.dim);
    for (std::size_t i = 0; i < n; ++i) {
        const FrameIndex t = in.frames[i];
        while (in.frames[lo] < t - half_width) ++lo;
        while (hi < n && in.frames[hi] <= t + half_width) ++hi;
        std::fill(acc.begin(), acc.end(), 0.0);
        double total = 0.0;
        for (std::size_t j = lo; j < hi; ++j) {
            const double w = weight(in.frames[j] - t);
            total += w;
            const auto r = in.row(j);
            for (std::size_t d = 0; d < in.dim; ++d) acc[d] += w * r[d];
        }
        auto o = out.row(i);
        for (std::size_t d = 0; d < in.dim; ++d) o[d] = acc[d] / total;
    }
    return out;
}

}  // namespace

int default_half_width(double variance) {
    require(variance > 0.0, "filter variance must be positive");
    return static_cast<int>(std::ceil(3.0 * std::sqrt(variance) - 1e-9));
}

FilterSpec FilterSpec::gaussian(double variance) {
    return {FilterKind::Gaussian, default_half_width(variance), variance};
}

bool FilterSpec::is_identity() const {
    return half_width == 0 || (kind == FilterKind::Gaussian && variance <= kMinVariance);
}

void FilterSpec::validate() const {
    require(half_width >= 0, "filter half-width must be non-negative");
    if (kind == FilterKind::Gaussian) require(variance >= 0.0, "Gaussian filter variance must be non-negative");
}

ScoreSeries::ScoreSeries(std::vector<FrameIndex> f, std::size_t d)
    : frames(std::move(f)), dim(d), values(frames.size() * d, 0.0) {}

ScoreSeries box_smooth(const ScoreSeries& input, int half_width) {
    require(half_width >= 0, "box_smooth: half-width must be non-negative");
    check_sorted(input);
    if (half_width == 0 || input.size() == 0) return input;
    return windowed_mean(input, half_width, [](FrameIndex) { return 1.0; });
}

ScoreSeries gaussian_smooth(const ScoreSeries& input, int half_width, double variance) {
    require(half_width >= 0, "gaussian_smooth: half-width must be non-negative");
    require(variance >= 0.0, "gaussian_smooth: variance must be non-negative");
    check_sorted(input);
    if (half_width == 0 || variance <= kMinVariance || input.size() == 0) return input;
    const double inv_two_var = 1.0 / (2.0 * variance);
    return windowed_mean(input, half_width, [inv_two_var](FrameIndex dt) {
        const auto d = static_cast<double>(dt);
        return std::exp(-d * d * inv_two_var);
    });
}

ScoreSeries smooth(const ScoreSeries& input, const FilterSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case FilterKind::Box: return box_smooth(input, spec.half_width);
        case FilterKind::Gaussian: return gaussian_smooth(input, spec.half_width, spec.variance);
    }
    return input;
}

namespace {

template <std::size_t N, typename Get>
ScoreSeries gather(const PredictionTrack& track, Get get) {
    ScoreSeries s(track.frames, N);
    for (std::size_t i = 0; i < track.values.size(); ++i) {
        const std::array<double, N>& v = get(track.values[i]);
        std::copy(v.begin(), v.end(), s.row(i).begin());
    }
    return s;
}

template <std::size_t N, typename Get>
void scatter(const ScoreSeries& s, PredictionTrack& track, Get get) {
    for (std::size_t i = 0; i < track.values.size(); ++i) {
        std::array<double, N>& v = get(track.values[i]);
        const auto r = s.row(i);
        std::copy(r.begin(), r.end(), v.begin());
    }
}

}  // namespace

PredictionTrack smooth_predictions(const PredictionTrack& track, const TaskFilters& filters) {
    require(track.frames.size() == track.values.size(), "prediction track: frames and values differ in length");
    PredictionTrack out = track;
    auto va = [](auto& p) -> auto& { return p.va; };
    auto expr = [](auto& p) -> auto& { return p.expr; };
    auto au = [](auto& p) -> auto& { return p.au; };

    if (!filters.va.is_identity()) scatter<2>(smooth(gather<2>(track, va), filters.va), out, va);
    if (!filters.expr.is_identity()) {
        scatter<kNumExpr>(smooth(gather<kNumExpr>(track, expr), filters.expr), out, expr);
        for (auto& p : out.values) {
            double sum = 0.0;
            for (double v : p.expr) sum += v;
            for (double& v : p.expr) v /= sum;
        }
    }
    if (!filters.au.is_identity()) scatter<kNumAu>(smooth(gather<kNumAu>(track, au), filters.au), out, au);
    return out;
}

PredictionTable smooth_predictions(const PredictionTable& table, const TaskFilters& filters) {
    PredictionTable out;
    out.reserve(table.size());
    for (const auto& track : table) out.push_back(smooth_predictions(track, filters));
    return out;
}

}  // namespace affpipe
