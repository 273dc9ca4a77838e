#include "affpipe/mtl_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "affpipe/error.hpp"
#include "affpipe/random.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

namespace {

constexpr double kMinLabelVariance = 1e-12;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// out = layer * in + bias
void affine(const DenseLayer& layer, std::span<const double> in, std::span<double> out) {
    for (std::size_t r = 0; r < layer.rows; ++r) {
        const double* w = layer.weights.data() + r * layer.cols;
        double acc = layer.bias[r];
        for (std::size_t c = 0; c < layer.cols; ++c) acc += w[c] * in[c];
        out[r] = acc;
    }
}

// grad += delta (outer) in; grad bias += delta
void accumulate_outer(DenseLayer& grad, std::span<const double> delta, std::span<const double> in) {
    for (std::size_t r = 0; r < grad.rows; ++r) {
        if (delta[r] == 0.0) continue;
        double* g = grad.weights.data() + r * grad.cols;
        for (std::size_t c = 0; c < grad.cols; ++c) g[c] += delta[r] * in[c];
        grad.bias[r] += delta[r];
    }
}

struct Activations {
    std::vector<double> input;   // [x; s]
    std::vector<double> hidden;  // post-relu
    std::array<double, kNumExpr> expr_logits{};
    std::array<double, kNumExpr> expr_prob{};
    double expr_log_norm = 0.0;  // log-sum-exp of the expression logits
    std::array<double, kNumAu> au_logits{};
    std::array<double, 2> va{};
};

void check_record(const HeadParams& params, const FrameRecord& record) {
    if (record.embedding.size() != params.input_dim)
        fail(ErrorKind::Contract, "embedding width " + std::to_string(record.embedding.size()) +
                                      " does not match head input width " + std::to_string(params.input_dim));
}

Activations run(const HeadParams& params, const FrameRecord& record) {
    check_record(params, record);
    Activations a;
    a.input.reserve(params.input_dim + kNumScores);
    a.input.assign(record.embedding.begin(), record.embedding.end());
    a.input.insert(a.input.end(), record.scores.begin(), record.scores.end());

    a.hidden.resize(params.hidden_width);
    affine(params.hidden, a.input, a.hidden);
    for (double& h : a.hidden) h = std::max(h, 0.0);

    affine(params.expr, a.hidden, a.expr_logits);
    const double top = *std::max_element(a.expr_logits.begin(), a.expr_logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumExpr; ++k) {
        a.expr_prob[k] = std::exp(a.expr_logits[k] - top);
        sum += a.expr_prob[k];
    }
    for (double& p : a.expr_prob) p /= sum;
    a.expr_log_norm = top + std::log(sum);

    affine(params.au, a.hidden, a.au_logits);

    std::array<double, 2> va_pre{};
    affine(params.va, record.scores, va_pre);
    for (std::size_t d = 0; d < 2; ++d) a.va[d] = std::tanh(va_pre[d]);
    return a;
}

// Computes the loss, and its gradient when `grad` is non-null.
double evaluate(const HeadParams& params, std::span<const LabeledFrame> batch, const TrainConfig& config,
                HeadParams* grad) {
    require(!batch.empty(), "loss: empty batch");
    const auto& tw = config.task_weights;

    std::vector<Activations> acts;
    acts.reserve(batch.size());
    bool any_label = false;
    double expr_weight_sum = 0.0;
    std::size_t au_count = 0;
    std::vector<std::size_t> va_frames;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        acts.push_back(run(params, *batch[n].record));
        const MtlLabels* l = batch[n].labels;
        if (l == nullptr || l->empty()) continue;
        any_label = true;
        if (l->expression) expr_weight_sum += config.expr_class_weights[static_cast<std::size_t>(*l->expression)];
        for (auto y : l->aus) au_count += y != kAuMissing;
        if (l->va) va_frames.push_back(n);
    }
    require(any_label, "loss: no labeled frames in batch");

    if (grad != nullptr) *grad = HeadParams(params.input_dim, params.hidden_width);

    // dL/d(expr logits) and dL/d(au logits) per frame; dL/d(va output) per frame.
    std::vector<std::array<double, kNumExpr>> d_expr(batch.size());
    std::vector<std::array<double, kNumAu>> d_au(batch.size());
    std::vector<std::array<double, 2>> d_va(batch.size());

    double expr_term = 0.0;
    if (expr_weight_sum > 0.0) {
        for (std::size_t n = 0; n < batch.size(); ++n) {
            const MtlLabels* l = batch[n].labels;
            if (l == nullptr || !l->expression) continue;
            const auto y = static_cast<std::size_t>(*l->expression);
            const double c = config.expr_class_weights[y];
            const auto& a = acts[n];
            expr_term += c * (a.expr_log_norm - a.expr_logits[y]);
            const double scale = tw.expr * c / expr_weight_sum;
            for (std::size_t k = 0; k < kNumExpr; ++k)
                d_expr[n][k] = scale * (a.expr_prob[k] - (k == y ? 1.0 : 0.0));
        }
        expr_term /= expr_weight_sum;
    }

    double au_term = 0.0;
    if (au_count > 0) {
        const double inv = 1.0 / static_cast<double>(au_count);
        for (std::size_t n = 0; n < batch.size(); ++n) {
            const MtlLabels* l = batch[n].labels;
            if (l == nullptr) continue;
            for (std::size_t i = 0; i < kNumAu; ++i) {
                const auto y = l->aus[i];
                if (y == kAuMissing) continue;
                const double z = acts[n].au_logits[i];
                const double pw = config.au_pos_weights[i];
                // -[pw*y*log(sig(z)) + (1-y)*log(1-sig(z))]
                au_term += y == 1 ? pw * softplus(-z) : softplus(z);
                const double s = sigmoid(z);
                d_au[n][i] = tw.au * inv * (y == 1 ? pw * (s - 1.0) : s);
            }
        }
        au_term *= inv;
    }

    double va_term = 0.0;
    const std::size_t nv = va_frames.size();
    if (nv >= 2) {
        const double inv_n = 1.0 / static_cast<double>(nv);
        bool defined = true;
        std::array<double, 2> ccc_val{};
        std::array<std::array<double, 5>, 2> mom{};  // mx, my, sxx, syy, sxy
        for (std::size_t d = 0; d < 2 && defined; ++d) {
            double mx = 0.0, my = 0.0;
            for (auto n : va_frames) {
                mx += acts[n].va[d];
                my += (*batch[n].labels->va)[d];
            }
            mx *= inv_n;
            my *= inv_n;
            double sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (auto n : va_frames) {
                const double dx = acts[n].va[d] - mx, dy = (*batch[n].labels->va)[d] - my;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
            sxx *= inv_n;
            syy *= inv_n;
            sxy *= inv_n;
            if (syy < kMinLabelVariance) defined = false;
            const double diff = mx - my;
            ccc_val[d] = 2.0 * sxy / (sxx + syy + diff * diff);
            mom[d] = {mx, my, sxx, syy, sxy};
        }
        if (defined) {
            va_term = 1.0 - (ccc_val[0] + ccc_val[1]) / 2.0;
            for (std::size_t d = 0; d < 2; ++d) {
                const auto [mx, my, sxx, syy, sxy] = mom[d];
                const double diff = mx - my;
                const double num = 2.0 * sxy;
                const double den = sxx + syy + diff * diff;
                for (auto n : va_frames) {
                    const double x = acts[n].va[d], y = (*batch[n].labels->va)[d];
                    const double d_num = 2.0 * (y - my) * inv_n;
                    const double d_den = 2.0 * (x - my) * inv_n;
                    const double d_ccc = (d_num * den - num * d_den) / (den * den);
                    d_va[n][d] = -0.5 * tw.va * d_ccc;
                }
            }
        }
    }

    const double total = tw.expr * expr_term + tw.va * va_term + tw.au * au_term;
    if (grad == nullptr) return total;

    std::vector<double> d_hidden(params.hidden_width);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto& a = acts[n];
        accumulate_outer(grad->expr, d_expr[n], a.hidden);
        accumulate_outer(grad->au, d_au[n], a.hidden);

        std::fill(d_hidden.begin(), d_hidden.end(), 0.0);
        for (std::size_t k = 0; k < kNumExpr; ++k) {
            if (d_expr[n][k] == 0.0) continue;
            for (std::size_t h = 0; h < params.hidden_width; ++h) d_hidden[h] += params.expr.w(k, h) * d_expr[n][k];
        }
        for (std::size_t i = 0; i < kNumAu; ++i) {
            if (d_au[n][i] == 0.0) continue;
            for (std::size_t h = 0; h < params.hidden_width; ++h) d_hidden[h] += params.au.w(i, h) * d_au[n][i];
        }
        for (std::size_t h = 0; h < params.hidden_width; ++h)
            if (a.hidden[h] <= 0.0) d_hidden[h] = 0.0;
        accumulate_outer(grad->hidden, d_hidden, a.input);

        std::array<double, 2> d_va_pre{};
        for (std::size_t d = 0; d < 2; ++d) d_va_pre[d] = d_va[n][d] * (1.0 - a.va[d] * a.va[d]);
        accumulate_outer(grad->va, d_va_pre, batch[n].record->scores);
    }
    return total;
}

}  // namespace

HeadParams::HeadParams(std::size_t dim, std::size_t hidden_units)
    : input_dim(dim),
      hidden_width(hidden_units),
      hidden(hidden_units, dim + kNumScores),
      expr(kNumExpr, hidden_units),
      au(kNumAu, hidden_units),
      va(2, kNumScores) {}

std::size_t HeadParams::parameter_count() const {
    std::size_t n = 0;
    for_each_layer([&](const char*, const DenseLayer& l) { n += l.weights.size() + l.bias.size(); });
    return n;
}

bool HeadParams::all_finite() const {
    bool ok = true;
    for_each_layer([&](const char*, const DenseLayer& l) {
        for (double v : l.weights) ok = ok && std::isfinite(v);
        for (double v : l.bias) ok = ok && std::isfinite(v);
    });
    return ok;
}

void HeadParams::check_shapes() const {
    const HeadParams ref(input_dim, hidden_width);
    auto check = [](const char* name, const DenseLayer& got, const DenseLayer& want) {
        if (got.rows != want.rows || got.cols != want.cols || got.weights.size() != want.weights.size() ||
            got.bias.size() != want.bias.size())
            fail(ErrorKind::Schema, std::string("layer '") + name + "' has shape " + std::to_string(got.rows) + "x" +
                                        std::to_string(got.cols) + ", expected " + std::to_string(want.rows) + "x" +
                                        std::to_string(want.cols));
    };
    check("hidden", hidden, ref.hidden);
    check("expr", expr, ref.expr);
    check("au", au, ref.au);
    check("va", va, ref.va);
}

void TrainConfig::validate() const {
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
    require(epochs > 0, "epochs must be positive");
    require(batch_size > 0, "batch_size must be positive");
    require(hidden_width > 0, "hidden_width must be positive");
    require(task_weights.va >= 0.0 && task_weights.expr >= 0.0 && task_weights.au >= 0.0,
            "task weights must be non-negative");
    require(task_weights.va > 0.0 || task_weights.expr > 0.0 || task_weights.au > 0.0,
            "at least one task weight must be positive");
    for (double w : expr_class_weights) require(w >= 0.0, "expression class weights must be non-negative");
    for (double w : au_pos_weights) require(w >= 0.0, "AU positive weights must be non-negative");
}

PredictionSet forward(const HeadParams& params, const FrameRecord& record) {
    const auto a = run(params, record);
    PredictionSet p;
    p.va = a.va;
    p.expr = a.expr_prob;
    for (std::size_t i = 0; i < kNumAu; ++i) p.au[i] = sigmoid(a.au_logits[i]);
    return p;
}

double loss(const HeadParams& params, std::span<const LabeledFrame> batch, const TrainConfig& config) {
    return evaluate(params, batch, config, nullptr);
}

LossAndGradient loss_and_gradient(const HeadParams& params, std::span<const LabeledFrame> batch,
                                  const TrainConfig& config) {
    LossAndGradient out;
    out.loss = evaluate(params, batch, config, &out.gradient);
    return out;
}

HeadParams gradient(const HeadParams& params, std::span<const LabeledFrame> batch, const TrainConfig& config) {
    return loss_and_gradient(params, batch, config).gradient;
}

HeadParams initialize(std::size_t dim, std::size_t hidden_units, std::uint64_t seed) {
    HeadParams p(dim, hidden_units);
    auto rng = substream(seed, "init");
    p.for_each_layer([&](const char*, DenseLayer& l) {
        const double a = std::sqrt(6.0 / static_cast<double>(l.rows + l.cols));
        std::uniform_real_distribution<double> u(-a, a);
        for (double& w : l.weights) w = u(rng);
    });
    return p;
}

DefaultWeights default_loss_weights(std::span<const LabeledFrame> frames) {
    std::array<double, kNumExpr> counts{};
    std::array<double, kNumAu> pos{}, neg{};
    for (const auto& f : frames) {
        if (f.labels == nullptr) continue;
        if (f.labels->expression) counts[static_cast<std::size_t>(*f.labels->expression)] += 1.0;
        for (std::size_t i = 0; i < kNumAu; ++i) {
            if (f.labels->aus[i] == 1) pos[i] += 1.0;
            else if (f.labels->aus[i] == 0) neg[i] += 1.0;
        }
    }
    DefaultWeights w{};
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumExpr; ++k) {
        w.expr_class_weights[k] = counts[k] > 0.0 ? 1.0 / counts[k] : 0.0;
        sum += w.expr_class_weights[k];
    }
    for (auto& c : w.expr_class_weights) c = sum > 0.0 ? c * static_cast<double>(kNumExpr) / sum : 1.0;
    for (std::size_t i = 0; i < kNumAu; ++i)
        w.au_pos_weights[i] = pos[i] > 0.0 && neg[i] > 0.0 ? neg[i] / pos[i] : 1.0;
    return w;
}

std::vector<LabeledFrame> join(const FeatureSet& features, const LabelMap& labels) {
    std::vector<LabeledFrame> out;
    for (const auto& track : features.tracks) {
        for (const auto& r : track.frames) {
            auto it = labels.find(FrameKey{r.video_id, r.frame});
            if (it != labels.end() && !it->second.empty()) out.push_back({&r, &it->second});
        }
    }
    return out;
}

TrainResult train(std::span<const LabeledFrame> frames, std::size_t dim, const TrainConfig& config,
                  const std::function<void(int, double)>& on_epoch) {
    config.validate();
    std::vector<LabeledFrame> data;
    for (const auto& f : frames)
        if (f.labels != nullptr && !f.labels->empty()) data.push_back(f);
    require(!data.empty(), "train: no labeled frames");
    auto has = [&](auto pred) { return std::any_of(data.begin(), data.end(), pred); };
    if (config.task_weights.va > 0.0)
        require(std::count_if(data.begin(), data.end(), [](const LabeledFrame& f) { return f.labels->va.has_value(); }) >= 2,
                "train: VA task enabled but fewer than two VA-labeled frames");
    if (config.task_weights.expr > 0.0)
        require(has([](const LabeledFrame& f) { return f.labels->expression.has_value(); }),
                "train: EXPR task enabled but no EXPR-labeled frames");
    if (config.task_weights.au > 0.0)
        require(has([](const LabeledFrame& f) { return f.labels->has_any_au(); }),
                "train: AU task enabled but no AU-labeled frames");

    TrainResult result;
    result.params = initialize(dim, config.hidden_width, config.seed);
    HeadParams velocity(dim, config.hidden_width);
    auto shuffle_rng = substream(config.seed, "shuffle");

    auto checked_loss = [&](int epoch) {
        const double l = loss(result.params, data, config);
        if (!std::isfinite(l) || !result.params.all_finite())
            fail(ErrorKind::Numerical, "train: non-finite loss at epoch " + std::to_string(epoch) +
                                           " (try a smaller learning rate)");
        return l;
    };
    result.initial_loss = checked_loss(0);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledFrame> batch;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            const auto g = gradient(result.params, batch, config);

            auto update = [&](DenseLayer& p, DenseLayer& v, const DenseLayer& gl) {
                for (std::size_t i = 0; i < p.weights.size(); ++i) {
                    v.weights[i] = config.momentum * v.weights[i] - config.learning_rate * gl.weights[i];
                    p.weights[i] += v.weights[i];
                }
                for (std::size_t i = 0; i < p.bias.size(); ++i) {
                    v.bias[i] = config.momentum * v.bias[i] - config.learning_rate * gl.bias[i];
                    p.bias[i] += v.bias[i];
                }
            };
            update(result.params.hidden, velocity.hidden, g.hidden);
            update(result.params.expr, velocity.expr, g.expr);
            update(result.params.au, velocity.au, g.au);
            update(result.params.va, velocity.va, g.va);
        }
        const double l = checked_loss(epoch);
        result.epoch_loss.push_back(l);
        if (on_epoch) on_epoch(epoch, l);
    }
    return result;
}

TrainResult train(const FeatureSet& features, const LabelMap& labels, const TrainConfig& config,
                  const std::function<void(int, double)>& on_epoch) {
    const auto frames = join(features, labels);
    return train(frames, features.dim, config, on_epoch);
}

PredictionTable predict(const HeadParams& params, const FeatureSet& features) {
    if (features.dim != params.input_dim)
        fail(ErrorKind::Schema, "features have width " + std::to_string(features.dim) + ", head expects " +
                                    std::to_string(params.input_dim));
    PredictionTable out;
    out.reserve(features.tracks.size());
    for (const auto& track : features.tracks) {
        PredictionTrack t{track.video_id, {}, {}};
        t.frames.reserve(track.frames.size());
        t.values.reserve(track.frames.size());
        for (const auto& r : track.frames) {
            t.frames.push_back(r.frame);
            t.values.push_back(forward(params, r));
        }
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

constexpr const char* kWeightsMagic = "affpipe-head";
constexpr int kWeightsVersion = 1;

class LineReader {
public:
    LineReader(std::istream& in, std::string file) : in_(in), file_(std::move(file)) {}

    std::istringstream next(const char* expecting) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            if (!trim(line).empty()) return std::istringstream(line);
        }
        fail(ErrorKind::Parse, file_ + ": truncated, expected " + expecting);
    }

    [[noreturn]] void error(ErrorKind kind, const std::string& msg) const {
        fail(kind, file_ + ": line " + std::to_string(line_) + ": " + msg);
    }

    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    std::string file_;
    std::size_t line_ = 0;
};

void read_values(LineReader& reader, std::span<double> out, const char* what) {
    auto line = reader.next(what);
    std::string tok;
    std::size_t i = 0;
    while (line >> tok) {
        if (i == out.size()) reader.error(ErrorKind::Schema, std::string("too many values in ") + what);
        out[i++] = parse_double(tok, reader.line(), what);
    }
    if (i != out.size()) reader.error(ErrorKind::Parse, std::string("too few values in ") + what);
}

}  // namespace

void save_params(const std::filesystem::path& path, const HeadParams& params) {
    params.check_shapes();
    auto out = open_output(path);
    out << kWeightsMagic << ' ' << kWeightsVersion << '\n';
    out << "dims " << params.input_dim << ' ' << params.hidden_width << '\n';
    params.for_each_layer([&](const char* name, const DenseLayer& l) {
        out << "layer " << name << ' ' << l.rows << ' ' << l.cols << '\n';
        for (std::size_t r = 0; r < l.rows; ++r) {
            for (std::size_t c = 0; c < l.cols; ++c) out << (c ? " " : "") << format_double(l.w(r, c));
            out << '\n';
        }
        for (std::size_t r = 0; r < l.rows; ++r) out << (r ? " " : "") << format_double(l.bias[r]);
        out << '\n';
    });
    out.close();
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

HeadParams load_params(const std::filesystem::path& path, std::optional<std::size_t> expected_dim,
                       std::optional<std::size_t> expected_hidden) {
    auto in = open_input(path);
    LineReader reader(in, path.string());

    {
        auto line = reader.next("version line");
        std::string magic;
        int version = 0;
        if (!(line >> magic >> version) || magic != kWeightsMagic)
            reader.error(ErrorKind::Schema, "not a head weights file");
        if (version != kWeightsVersion)
            reader.error(ErrorKind::Schema, "unsupported weights version " + std::to_string(version));
    }
    std::size_t dim = 0, hidden = 0;
    {
        auto line = reader.next("dims line");
        std::string key;
        if (!(line >> key >> dim >> hidden) || key != "dims" || dim == 0 || hidden == 0)
            reader.error(ErrorKind::Parse, "expected 'dims <D> <H>'");
    }
    if (expected_dim && *expected_dim != dim)
        fail(ErrorKind::Schema, path.string() + ": weights have input width " + std::to_string(dim) +
                                    ", expected " + std::to_string(*expected_dim));
    if (expected_hidden && *expected_hidden != hidden)
        fail(ErrorKind::Schema, path.string() + ": weights have hidden width " + std::to_string(hidden) +
                                    ", expected " + std::to_string(*expected_hidden));

    HeadParams params(dim, hidden);
    params.for_each_layer([&](const char* name, DenseLayer& l) {
        auto line = reader.next("layer header");
        std::string key, got_name;
        std::size_t rows = 0, cols = 0;
        if (!(line >> key >> got_name >> rows >> cols) || key != "layer")
            reader.error(ErrorKind::Parse, "expected 'layer <name> <rows> <cols>'");
        if (got_name != name) reader.error(ErrorKind::Schema, "expected layer '" + std::string(name) + "'");
        if (rows != l.rows || cols != l.cols)
            reader.error(ErrorKind::Schema, "layer '" + got_name + "' is " + std::to_string(rows) + "x" +
                                                std::to_string(cols) + ", dims imply " + std::to_string(l.rows) +
                                                "x" + std::to_string(l.cols));
        for (std::size_t r = 0; r < rows; ++r)
            read_values(reader, std::span<double>(l.weights.data() + r * cols, cols), name);
        read_values(reader, l.bias, name);
    });
    return params;
}

}  // namespace affpipe
