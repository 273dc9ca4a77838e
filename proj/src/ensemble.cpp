#include "affpipe/ensemble.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "affpipe/error.hpp"
#include "affpipe/metrics.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

namespace {

template <std::size_t N>
std::array<double, N> mix(const std::array<double, N>& a, const std::array<double, N>& b, double w) {
    std::array<double, N> out;
    // equal inputs pass through untouched so blend(p, p, w) == p bit for bit
    for (std::size_t i = 0; i < N; ++i) out[i] = a[i] == b[i] ? a[i] : w * a[i] + (1.0 - w) * b[i];
    return out;
}

// Labeled frames of each task with both models' predictions.
struct TaskFrames {
    std::vector<const PredictionSet*> first_va, second_va, first_expr, second_expr, first_au, second_au;
    std::vector<double> valence, arousal;
    std::vector<int> expression;
    std::vector<AuLabels> aus;
};

TaskFrames collect(const PredictionTable& first, const PredictionTable& second, const LabelMap& labels) {
    TaskFrames tf;
    for (const auto& [key, l] : labels) {
        const auto* p1 = find_prediction(first, key);
        if (p1 == nullptr) continue;
        const auto* p2 = find_prediction(second, key);
        if (l.va) {
            tf.first_va.push_back(p1);
            tf.second_va.push_back(p2);
            tf.valence.push_back((*l.va)[0]);
            tf.arousal.push_back((*l.va)[1]);
        }
        if (l.expression) {
            tf.first_expr.push_back(p1);
            tf.second_expr.push_back(p2);
            tf.expression.push_back(*l.expression);
        }
        if (l.has_any_au()) {
            tf.first_au.push_back(p1);
            tf.second_au.push_back(p2);
            tf.aus.push_back(l.aus);
        }
    }
    return tf;
}

double va_metric(const TaskFrames& tf, double w) {
    std::vector<double> v(tf.valence.size()), a(tf.valence.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto m = mix(tf.first_va[i]->va, tf.second_va[i]->va, w);
        v[i] = m[0];
        a[i] = m[1];
    }
    return (ccc(v, tf.valence).value + ccc(a, tf.arousal).value) / 2.0;
}

double expr_metric(const TaskFrames& tf, double w) {
    std::vector<int> pred(tf.expression.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        pred[i] = argmax(mix(tf.first_expr[i]->expr, tf.second_expr[i]->expr, w));
    return macro_f1(pred, tf.expression).value;
}

double au_metric(const TaskFrames& tf, double w, const AuThresholds& thresholds) {
    std::vector<AuDecisions> pred(tf.aus.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        pred[i] = apply_thresholds(mix(tf.first_au[i]->au, tf.second_au[i]->au, w), thresholds);
    return p_au(pred, tf.aus).value;
}

template <typename Metric>
double search(const std::vector<double>& grid, std::vector<GridPoint>& trace, double& best_metric, Metric metric) {
    double best_w = grid.front();
    best_metric = -std::numeric_limits<double>::infinity();
    for (double w : grid) {
        const double m = metric(w);
        trace.push_back({w, m});
        if (m > best_metric) {  // grid ascends, so ties keep the smaller weight
            best_metric = m;
            best_w = w;
        }
    }
    return best_w;
}

}  // namespace

void BlendWeights::validate() const {
    for (double w : {va, expr, au})
        if (!(w >= 0.0 && w <= 1.0)) fail(ErrorKind::Validation, "blend weight " + format_double(w) + " outside [0, 1]");
}

PredictionSet blend(const PredictionSet& first, const PredictionSet& second, const BlendWeights& w) {
    return {mix(first.va, second.va, w.va), mix(first.expr, second.expr, w.expr), mix(first.au, second.au, w.au)};
}

PredictionTable blend(const PredictionTable& first, const PredictionTable& second, const BlendWeights& w) {
    w.validate();
    if (!same_keys(first, second)) fail(ErrorKind::Contract, "blend: prediction tables cover different frames");
    PredictionTable out = first;
    for (std::size_t t = 0; t < out.size(); ++t)
        for (std::size_t i = 0; i < out[t].values.size(); ++i)
            out[t].values[i] = blend(first[t].values[i], second[t].values[i], w);
    return out;
}

std::vector<double> weight_grid(double step) {
    require(step > 0.0 && step <= 1.0, "weight grid step must lie in (0, 1]");
    std::vector<double> grid;
    for (std::size_t i = 0;; ++i) {
        const double w = static_cast<double>(i) * step;
        if (w >= 1.0 - 1e-9) break;
        grid.push_back(w);
    }
    grid.push_back(1.0);
    return grid;
}

double task_metric(BlendTask task, const PredictionTable& predictions, const LabelMap& labels,
                   const AuThresholds& thresholds) {
    const auto tf = collect(predictions, predictions, labels);
    switch (task) {
        case BlendTask::Va:
            require(tf.valence.size() >= 2, "task metric: fewer than two VA-labeled frames");
            return va_metric(tf, 1.0);
        case BlendTask::Expr:
            require(!tf.expression.empty(), "task metric: no EXPR-labeled frames");
            return expr_metric(tf, 1.0);
        case BlendTask::Au:
            require(!tf.aus.empty(), "task metric: no AU-labeled frames");
            return au_metric(tf, 1.0, thresholds);
    }
    return 0.0;
}

BlendTuning tune_blend_weights(const PredictionTable& first, const PredictionTable& second,
                               const LabelMap& labels, const BlendTuneOptions& options) {
    options.fallback.validate();
    if (!same_keys(first, second)) fail(ErrorKind::Contract, "tune_blend: prediction tables cover different frames");
    const auto grid = weight_grid(options.step);
    const auto tf = collect(first, second, labels);

    BlendTuning out;
    out.weights = options.fallback;
    if (options.tune_va) {
        require(tf.valence.size() >= 2, "tune_blend: fewer than two VA-labeled frames");
        out.weights.va = search(grid, out.va_trace, out.va_metric, [&](double w) { return va_metric(tf, w); });
    }
    if (options.tune_expr) {
        require(!tf.expression.empty(), "tune_blend: no EXPR-labeled frames");
        out.weights.expr = search(grid, out.expr_trace, out.expr_metric, [&](double w) { return expr_metric(tf, w); });
    }
    if (options.tune_au) {
        require(!tf.aus.empty(), "tune_blend: no AU-labeled frames");
        out.weights.au = search(grid, out.au_trace, out.au_metric,
                                [&](double w) { return au_metric(tf, w, options.au_thresholds); });
    }
    return out;
}

void save_blend_weights(const std::filesystem::path& path, const BlendTuning& tuning) {
    auto out = open_output(path);
    out << "va " << format_double(tuning.weights.va) << ' ' << format_double(tuning.va_metric) << '\n';
    out << "expr " << format_double(tuning.weights.expr) << ' ' << format_double(tuning.expr_metric) << '\n';
    out << "au " << format_double(tuning.weights.au) << ' ' << format_double(tuning.au_metric) << '\n';
    out.close();
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

void save_blend_weights(const std::filesystem::path& path, const BlendWeights& weights) {
    auto out = open_output(path);
    out << "va " << format_double(weights.va) << '\n';
    out << "expr " << format_double(weights.expr) << '\n';
    out << "au " << format_double(weights.au) << '\n';
    out.close();
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

BlendWeights load_blend_weights(const std::filesystem::path& path) {
    auto in = open_input(path);
    BlendWeights w;
    bool seen[3] = {false, false, false};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream fields{std::string(t)};
        std::string task, value;
        if (!(fields >> task >> value))
            fail(ErrorKind::Parse, path.string() + ": line " + std::to_string(line_no) + ": expected '<task> <weight> [metric]'");
        const double v = parse_double(value, line_no, task);
        if (task == "va") { w.va = v; seen[0] = true; }
        else if (task == "expr") { w.expr = v; seen[1] = true; }
        else if (task == "au") { w.au = v; seen[2] = true; }
        else fail(ErrorKind::Schema, path.string() + ": unknown task '" + task + "'");
    }
    if (!(seen[0] && seen[1] && seen[2])) fail(ErrorKind::Schema, path.string() + ": expected va, expr and au weights");
    w.validate();
    return w;
}

}  // namespace affpipe
