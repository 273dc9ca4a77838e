// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

#include "affpipe/au_threshold.hpp"
#include "affpipe/compound.hpp"
#include "affpipe/ensemble.hpp"
#include "affpipe/metrics.hpp"
#include "affpipe/mtl_head.hpp"
#include "affpipe/pipeline.hpp"
#include "affpipe/synth.hpp"
#include "affpipe/temporal_filters.hpp"
#include "support.hpp"

using namespace affpipe;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr double kFilterTol = 1e-12;
constexpr double kFilterSeconds = 5.0;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFloor = 1e-6;  // below this a partial is judged by absolute error
constexpr double kGradSeconds = 30.0;
constexpr double kMetricTol = 1e-10;
constexpr double kShiftedCcc = 0.714285714;
constexpr double kShiftedCccTol = 1e-9;
constexpr double kMinF1Gain = 0.03;
constexpr double kMinCccRatio = 1.1;
constexpr double kSmoothingSeconds = 60.0;
constexpr double kMeanTol = 1e-15;
constexpr double kReferenceTol = 1e-12;
constexpr double kBalancedKl = 1e-12;

// Regression constants for criterion 6, frozen from the first run on the
// default benchmark (seed 2024, head seed 1).
constexpr std::uint64_t kBenchSeed = 2024;
constexpr std::uint64_t kHeadSeed = 1;
constexpr double kRegressionTol = 1e-9;
constexpr double kFrozenFrameF1 = 0.70833319283061258;
constexpr double kFrozenSmoothF1 = 0.94211074775435621;
constexpr double kFrozenFrameCcc = 0.49370409620805056;
constexpr double kFrozenSmoothCcc = 0.75643934095357568;

struct Outcome {
    bool pass;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// 1 -------------------------------------------------------------------------

Outcome filters_vs_brute_force() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> len(1, 200), dim(1, 12), gap(1, 4), half(0, 12);
    std::uniform_real_distribution<double> var(0.2, 25.0);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<std::size_t>(len(rng));
        const auto d = static_cast<std::size_t>(dim(rng));
        std::vector<std::int64_t> frames;
        std::int64_t f = gap(rng);
        for (std::size_t i = 0; i < n; ++i) frames.push_back(f += gap(rng));
        ScoreSeries s(frames, d);
        for (double& v : s.values) v = g(rng);
        const int k = half(rng);
        const double v2 = var(rng);
        const auto box = box_smooth(s, k);
        const auto gauss = gaussian_smooth(s, k, v2);
        const auto want_box = testing::brute_box(frames, s.values, d, k);
        const auto want_gauss = testing::brute_gauss(frames, s.values, d, k, v2);
        if (box.frames != s.frames || gauss.frames != s.frames) return {false, "frame index set changed"};
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            worst = std::max(worst, std::fabs(box.values[i] - want_box[i]));
            worst = std::max(worst, std::fabs(gauss.values[i] - want_gauss[i]));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= kFilterTol && secs < kFilterSeconds,
            "max abs err " + fmt(worst) + " (tol " + fmt(kFilterTol) + "), " + fmt(secs) + " s"};
}

// 2 -------------------------------------------------------------------------

std::vector<double*> flat(HeadParams& p) {
    std::vector<double*> out;
    p.for_each_layer([&](const char*, DenseLayer& l) {
        for (double& w : l.weights) out.push_back(&w);
        for (double& b : l.bias) out.push_back(&b);
    });
    return out;
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> dim(1, 16), hid(1, 8), bat(3, 12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_elem = 0.0, worst_block = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
        const auto d = static_cast<std::size_t>(dim(rng));
        const auto h = static_cast<std::size_t>(hid(rng));
        const auto n = static_cast<std::size_t>(bat(rng));
        auto params = testing::random_params(rng, d, h, 0.6);
        std::vector<FrameRecord> recs;
        std::vector<MtlLabels> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            recs.push_back(testing::random_record(rng, d, static_cast<FrameIndex>(i)));
            auto& l = labels[i];
            if (u(rng) < 0.7) l.va = std::array<double, 2>{2 * u(rng) - 1, 2 * u(rng) - 1};
            if (u(rng) < 0.7) l.expression = static_cast<int>(u(rng) * kNumExpr);
            for (auto& a : l.aus) a = u(rng) < 0.4 ? kAuMissing : static_cast<std::int8_t>(u(rng) < 0.5);
        }
        // guarantee every task is exercised
        labels[0].va = std::array<double, 2>{0.4, -0.3};
        labels[1].va = std::array<double, 2>{-0.6, 0.5};
        labels[2].expression = 3;
        labels[2].aus[4] = 1;
        std::vector<LabeledFrame> batch;
        for (std::size_t i = 0; i < n; ++i) batch.push_back({&recs[i], &labels[i]});

        TrainConfig cfg;
        cfg.task_weights = {0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng)};
        for (auto& w : cfg.expr_class_weights) w = 0.2 + 2 * u(rng);
        for (auto& w : cfg.au_pos_weights) w = 0.2 + 3 * u(rng);

        auto analytic = gradient(params, batch, cfg);
        auto a_flat = flat(analytic);
        auto p_flat = flat(params);
        std::size_t idx = 0;
        params.for_each_layer([&](const char*, DenseLayer& layer) {
            double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
            const std::size_t count = layer.weights.size() + layer.bias.size();
            for (std::size_t j = 0; j < count; ++j, ++idx) {
                double& x = *p_flat[idx];
                const double keep = x;
                x = keep + kGradStep;
                const double up = loss(params, batch, cfg);
                x = keep - kGradStep;
                const double down = loss(params, batch, cfg);
                x = keep;
                const double numeric = (up - down) / (2 * kGradStep);
                const double a = *a_flat[idx];
                const double err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), kGradFloor});
                worst_elem = std::max(worst_elem, err);
                diff2 += (a - numeric) * (a - numeric);
                a2 += a * a;
                n2 += numeric * numeric;
            }
            const double denom = std::max({std::sqrt(a2), std::sqrt(n2), kGradFloor});
            worst_block = std::max(worst_block, std::sqrt(diff2) / denom);
        });
    }
    const double secs = seconds_since(t0);
    return {worst_elem <= kGradRelTol && worst_block <= kGradRelTol && secs < kGradSeconds,
            "max element rel err " + fmt(worst_elem) + ", max block rel err " + fmt(worst_block) + " (tol " +
                fmt(kGradRelTol) + ", floor " + fmt(kGradFloor) + "), " + fmt(secs) + " s"};
}

// 3 -------------------------------------------------------------------------

Outcome metric_oracles() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    auto note = [&](double a, double b) { worst = std::max(worst, std::fabs(a - b)); };
    for (int inst = 0; inst < 200; ++inst) {
        // CCC
        const std::size_t n = 2 + static_cast<std::size_t>(u(rng) * 40);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = g(rng);
            y[i] = u(rng) * x[i] + g(rng) + (u(rng) - 0.5);
        }
        note(ccc(x, y).value, testing::oracle_ccc(x, y));

        // macro F1 over 8 classes
        const std::size_t m = 1 + static_cast<std::size_t>(u(rng) * 60);
        std::vector<int> pred(m), truth(m);
        const int classes_used = 1 + static_cast<int>(u(rng) * 8);
        for (std::size_t i = 0; i < m; ++i) {
            truth[i] = static_cast<int>(u(rng) * classes_used);
            pred[i] = u(rng) < 0.5 ? truth[i] : static_cast<int>(u(rng) * 8);
        }
        note(macro_f1(pred, truth).value, testing::oracle_macro_f1(pred, truth, 8));

        // per-AU F1 with missing labels
        std::vector<AuDecisions> dec(m);
        std::vector<AuLabels> lab(m);
        std::vector<std::array<int, kNumAu>> odec(m), olab(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t a = 0; a < kNumAu; ++a) {
                const int yl = u(rng) < 0.2 ? -1 : static_cast<int>(u(rng) < 0.4);
                const int pd = static_cast<int>(u(rng) < 0.4);
                lab[i][a] = static_cast<std::int8_t>(yl);
                dec[i][a] = static_cast<std::uint8_t>(pd);
                olab[i][a] = yl;
                odec[i][a] = pd;
            }
        lab[0][0] = 1;  // at least one labeled value
        olab[0][0] = 1;
        note(p_au(dec, lab).value, testing::oracle_au_f1(odec, olab));

        // KL with occasional empty classes
        auto ref = testing::random_simplex(rng, kNumCompound);
        auto est = testing::random_simplex(rng, kNumCompound);
        if (inst % 3 == 0) {
            const auto hole = static_cast<std::size_t>(u(rng) * kNumCompound);
            const double moved = est[hole];
            est[hole] = 0.0;
            est[(hole + 1) % kNumCompound] += moved;
        }
        note(kl_divergence(ref, est).value, testing::oracle_kl(ref, est, kKlEpsilon));

        // kappa
        const int kc = 2 + static_cast<int>(u(rng) * 4);
        std::vector<int> ra(m), rb(m);
        for (std::size_t i = 0; i < m; ++i) {
            ra[i] = static_cast<int>(u(rng) * kc);
            rb[i] = u(rng) < 0.6 ? ra[i] : static_cast<int>(u(rng) * kc);
        }
        note(cohen_kappa(ra, rb).value, testing::oracle_kappa(ra, rb, kc));
    }
    const double shifted = ccc(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 3, 4, 5}).value;
    const bool shifted_ok = std::fabs(shifted - kShiftedCcc) <= kShiftedCccTol;
    return {worst <= kMetricTol && shifted_ok,
            "max abs err " + fmt(worst) + " (tol " + fmt(kMetricTol) + "), shifted CCC " + full(shifted)};
}

// 4 -------------------------------------------------------------------------

Outcome threshold_joint_search() {
    const auto grid = default_threshold_grid();
    int mismatches = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(4000 + seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<AuScores> scores(50);
        std::vector<AuLabels> labels(50, MtlLabels::filled_missing());
        for (std::size_t i = 0; i < 50; ++i) {
            scores[i].fill(0.5);
            for (std::size_t a = 0; a < 2; ++a) {
                labels[i][a] = u(rng) < 0.1 ? kAuMissing : static_cast<std::int8_t>(u(rng) < 0.45);
                scores[i][a] = std::clamp(0.35 * (labels[i][a] == 1) + 0.75 * u(rng), 0.0, 1.0);
            }
        }
        labels[0][0] = labels[0][1] = 1;
        labels[1][0] = labels[1][1] = 0;
        auto f1 = [&](std::size_t a, double th) {
            long tp = 0, fp = 0, fn = 0;
            for (std::size_t i = 0; i < 50; ++i) {
                if (labels[i][a] == kAuMissing) continue;
                const bool p = scores[i][a] >= th;
                tp += p && labels[i][a] == 1;
                fp += p && labels[i][a] == 0;
                fn += !p && labels[i][a] == 1;
            }
            return testing::oracle_f1(tp, fp, fn);
        };
        // joint search over both AUs; first strict improvement in row-major order
        double best = -1.0;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t j = 0; j < grid.size(); ++j) {
                const double mean = (f1(0, grid[i]) + f1(1, grid[j])) / 2.0;
                if (mean > best) {
                    best = mean;
                    bi = i;
                    bj = j;
                }
            }
        const auto t = tune_thresholds(scores, labels, grid);
        if (t.thresholds[0] != grid[bi] || t.thresholds[1] != grid[bj] || (t.f1[0] + t.f1[1]) / 2.0 != best) ++mismatches;
    }
    return {mismatches == 0, std::to_string(mismatches) + " of 20 seeds differ from the joint search"};
}

// 5 -------------------------------------------------------------------------

struct BlendFixture {
    PredictionTable first, second;
    LabelMap labels;
};

BlendFixture blend_fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    BlendFixture fx;
    for (int v = 0; v < 3; ++v) {
        PredictionTrack a{"vid" + std::to_string(v), {}, {}}, b = a;
        for (int f = 0; f < 40; ++f) {
            MtlLabels l;
            if (u(rng) < 0.9) l.va = std::array<double, 2>{std::tanh(g(rng)), std::tanh(g(rng))};
            if (u(rng) < 0.9) l.expression = static_cast<int>(u(rng) * kNumExpr);
            for (auto& au : l.aus) au = u(rng) < 0.1 ? kAuMissing : static_cast<std::int8_t>(u(rng) < 0.4);
            if (!l.empty()) fx.labels[{a.video_id, f}] = l;
            // two noisy models of different quality
            auto model = [&](double skill) {
                PredictionSet p;
                for (std::size_t d = 0; d < 2; ++d)
                    p.va[d] = std::clamp((l.va ? skill * (*l.va)[d] : 0.0) + 0.4 * g(rng), -1.0, 1.0);
                std::array<double, kNumExpr> z;
                for (auto& x : z) x = g(rng);
                if (l.expression) z[static_cast<std::size_t>(*l.expression)] += 2.0 * skill;
                const double top = *std::max_element(z.begin(), z.end());
                double s = 0.0;
                for (std::size_t k = 0; k < kNumExpr; ++k) s += p.expr[k] = std::exp(z[k] - top);
                for (auto& x : p.expr) x /= s;
                for (std::size_t k = 0; k < kNumAu; ++k)
                    p.au[k] = std::clamp((l.aus[k] == 1 ? 0.3 * skill : 0.0) + 0.7 * u(rng), 0.0, 1.0);
                return p;
            };
            a.frames.push_back(f);
            b.frames.push_back(f);
            a.values.push_back(model(0.5 + u(rng)));
            b.values.push_back(model(0.5 + u(rng)));
        }
        fx.first.push_back(a);
        fx.second.push_back(b);
    }
    return fx;
}

// Metric of each task for first/second mixed at weight w, computed from scratch.
std::array<double, 3> scan_metrics(const BlendFixture& fx, double w, const AuThresholds& th) {
    std::vector<double> pv, pa, yv, ya;
    std::vector<int> pe, ye;
    std::vector<std::array<int, kNumAu>> pd, yd;
    for (std::size_t t = 0; t < fx.first.size(); ++t)
        for (std::size_t i = 0; i < fx.first[t].frames.size(); ++i) {
            auto it = fx.labels.find({fx.first[t].video_id, fx.first[t].frames[i]});
            if (it == fx.labels.end()) continue;
            const auto& l = it->second;
            const auto& a = fx.first[t].values[i];
            const auto& b = fx.second[t].values[i];
            if (l.va) {
                pv.push_back(w * a.va[0] + (1 - w) * b.va[0]);
                pa.push_back(w * a.va[1] + (1 - w) * b.va[1]);
                yv.push_back((*l.va)[0]);
                ya.push_back((*l.va)[1]);
            }
            if (l.expression) {
                std::size_t best = 0;
                double bv = -1.0;
                for (std::size_t k = 0; k < kNumExpr; ++k) {
                    const double m = w * a.expr[k] + (1 - w) * b.expr[k];
                    if (m > bv) {
                        bv = m;
                        best = k;
                    }
                }
                pe.push_back(static_cast<int>(best));
                ye.push_back(*l.expression);
            }
            if (l.has_any_au()) {
                std::array<int, kNumAu> d{}, y{};
                for (std::size_t k = 0; k < kNumAu; ++k) {
                    d[k] = w * a.au[k] + (1 - w) * b.au[k] >= th[k];
                    y[k] = l.aus[k];
                }
                pd.push_back(d);
                yd.push_back(y);
            }
        }
    return {(testing::oracle_ccc(pv, yv) + testing::oracle_ccc(pa, ya)) / 2.0,
            testing::oracle_macro_f1(pe, ye, kNumExpr), testing::oracle_au_f1(pd, yd)};
}

Outcome blend_exhaustive() {
    int mismatches = 0;
    double worst_metric = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto fx = blend_fixture(5000 + seed);
        for (double step : {0.1, 0.05}) {
            const int steps = static_cast<int>(std::lround(1.0 / step));
            std::array<double, 3> best{-2.0, -2.0, -2.0}, best_w{};
            for (int i = 0; i <= steps; ++i) {
                const double w = i == steps ? 1.0 : i * step;
                const auto m = scan_metrics(fx, w, AuThresholds{});
                for (std::size_t t = 0; t < 3; ++t)
                    if (m[t] > best[t]) {
                        best[t] = m[t];
                        best_w[t] = w;
                    }
            }
            BlendTuneOptions opt;
            opt.step = step;
            const auto tuned = tune_blend_weights(fx.first, fx.second, fx.labels, opt);
            if (tuned.weights.va != best_w[0] || tuned.weights.expr != best_w[1] || tuned.weights.au != best_w[2])
                ++mismatches;
            worst_metric = std::max({worst_metric, std::fabs(tuned.va_metric - best[0]),
                                     std::fabs(tuned.expr_metric - best[1]), std::fabs(tuned.au_metric - best[2])});
        }
    }
    return {mismatches == 0 && worst_metric <= kMetricTol,
            std::to_string(mismatches) + " of 20 scans disagree on weights, max metric diff " + fmt(worst_metric)};
}

// 6 -------------------------------------------------------------------------

Outcome smoothing_benefit() {
    const auto t0 = Clock::now();
    SynthSpec spec;  // defaults: 20 tracks x 300 frames, noise 0.8, segments >= 30
    const auto train_set = synthesize(spec, kBenchSeed);
    auto val_spec = spec;
    val_spec.prefix = "val";
    const auto val_set = synthesize(val_spec, kBenchSeed);

    const auto frames = join(train_set.features, train_set.labels);
    TrainConfig cfg;
    cfg.seed = kHeadSeed;
    const auto dw = default_loss_weights(frames);
    cfg.expr_class_weights = dw.expr_class_weights;
    cfg.au_pos_weights = dw.au_pos_weights;
    const auto head = train(frames, spec.dim, cfg);
    const auto preds = predict(head.params, val_set.features);

    const AuThresholds th;
    const auto base = evaluate_mtl(preds, val_set.labels, th);
    const std::vector<double> grid = {0.5, 1, 2, 4, 8, 16};
    const auto curve = smoothing_curve(preds, val_set.labels, grid, th);
    double best_f1 = -1.0, best_ccc = -2.0, f1_var = 0.0, ccc_var = 0.0;
    for (const auto& p : curve) {
        if (p.score.p_expr > best_f1) {
            best_f1 = p.score.p_expr;
            f1_var = p.variance;
        }
        if (p.score.p_va > best_ccc) {
            best_ccc = p.score.p_va;
            ccc_var = p.variance;
        }
    }
    const double secs = seconds_since(t0);
    const double gain = best_f1 - base.p_expr;
    const double ratio = best_ccc / base.p_va;
    const bool frozen = std::fabs(base.p_expr - kFrozenFrameF1) <= kRegressionTol &&
                        std::fabs(best_f1 - kFrozenSmoothF1) <= kRegressionTol &&
                        std::fabs(base.p_va - kFrozenFrameCcc) <= kRegressionTol &&
                        std::fabs(best_ccc - kFrozenSmoothCcc) <= kRegressionTol;
    std::ostringstream os;
    os << "macro-F1 " << full(base.p_expr) << " -> " << full(best_f1) << " at var " << f1_var << " (+"
       << fmt(100 * gain) << " pts, need " << fmt(100 * kMinF1Gain) << "); mean CCC " << full(base.p_va) << " -> "
       << full(best_ccc) << " at var " << ccc_var << " (x" << fmt(ratio) << ", need " << fmt(kMinCccRatio)
       << "); frozen values " << (frozen ? "match" : "DIFFER") << "; " << fmt(secs) << " s";
    return {gain >= kMinF1Gain && ratio >= kMinCccRatio && frozen && secs < kSmoothingSeconds, os.str()};
}

// 7 -------------------------------------------------------------------------

Outcome mean_inequality() {
    std::mt19937_64 rng(707);
    std::size_t violations = 0;
    for (int i = 0; i < 1000000; ++i) {
        const auto v = testing::random_simplex(rng, kNumExpr);
        BasicProbabilities p;
        std::copy(v.begin(), v.end(), p.begin());
        const auto a = compound_scores(p, MeanKind::Arithmetic);
        const auto g = compound_scores(p, MeanKind::Geometric);
        const auto h = compound_scores(p, MeanKind::Harmonic);
        for (std::size_t c = 0; c < kNumCompound; ++c)
            violations += !(h[c] <= g[c] + kMeanTol && g[c] <= a[c] + kMeanTol);
    }
    return {violations == 0, std::to_string(violations) + " violations over 10^6 points x 7 pairs"};
}

// 8 -------------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(AFFPIPE_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool run_pipeline(const fs::path& dir) {
    const std::string o = " -o '" + dir.string() + "'";
    auto p = [&](const char* name) { return " '" + (dir / name).string() + "'"; };
    const std::vector<std::string> steps = {
        "synth --seed 31 --set synth.tracks=6 --set synth.validation_tracks=4",
        "train --seed 1 --features" + p("features.csv") + " --labels" + p("labels.csv"),
        "train --seed 2 --output-name head2.weights --set head.hidden_width=16 --features" + p("features.csv") +
            " --labels" + p("labels.csv"),
        "predict --weights" + p("head.weights") + " --features" + p("val_features.csv"),
        "predict --weights" + p("head2.weights") + " --features" + p("val_features.csv") +
            " --output-name predictions2.csv",
        "tune-blend --predictions" + p("predictions.csv") + " --predictions2" + p("predictions2.csv") +
            " --labels" + p("val_labels.csv"),
        "blend --predictions" + p("predictions.csv") + " --predictions2" + p("predictions2.csv") +
            " --blend-weights" + p("blend_weights.txt"),
        "smooth --predictions" + p("predictions_blended.csv") +
            " --set filter.expr.kind=gaussian --set filter.expr.variance=4"
            " --set filter.va.kind=gaussian --set filter.va.variance=8",
        "tune-au --predictions" + p("predictions_smoothed.csv") + " --labels" + p("val_labels.csv"),
        "eval --predictions" + p("predictions_smoothed.csv") + " --labels" + p("val_labels.csv") +
            " --thresholds" + p("au_thresholds.txt"),
        "compound --faces" + p("val_faces.csv") + " --set compound.mean=G --set compound.filter.kind=gaussian"
            " --set compound.filter.variance=2",
        "report --predictions" + p("predictions_blended.csv") + " --labels" + p("val_labels.csv") + " --faces" +
            p("val_faces.csv"),
    };
    for (const auto& s : steps)
        if (run_cli(s + o) != 0) {
            std::cerr << "pipeline step failed: " << s << '\n';
            return false;
        }
    return true;
}

Outcome determinism() {
    testing::TempDir a("accept"), b("accept");
    if (!run_pipeline(a.path()) || !run_pipeline(b.path())) return {false, "pipeline did not complete"};
    std::size_t files = 0, differ = 0;
    for (const auto& entry : fs::directory_iterator(a.path())) {
        ++files;
        const auto other = b.path() / entry.path().filename();
        if (!fs::exists(other) || testing::read_text(entry.path()) != testing::read_text(other)) ++differ;
    }
    std::size_t files_b = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(b.path())) ++files_b;
    return {differ == 0 && files == files_b && files >= 20,
            std::to_string(files) + " output files, " + std::to_string(differ) + " differ"};
}

// 9 -------------------------------------------------------------------------

Outcome reference_distribution_check() {
    const auto ref = reference_distribution();
    double sum = 0.0;
    for (double r : ref) sum += r;
    const double hs = ref[static_cast<std::size_t>(CompoundClass::HappilySurprised)];
    // a label stream whose class counts are exactly the reference counts
    std::vector<CompoundClass> stream;
    for (std::size_t c = 0; c < kNumCompound; ++c)
        stream.insert(stream.end(), static_cast<std::size_t>(kReferenceCounts[c]), static_cast<CompoundClass>(c));
    const auto report = class_balance_report(stream);
    const bool ok = std::fabs(sum - 1.0) <= kReferenceTol && std::fabs(hs - 24915.0 / 90302.0) <= kReferenceTol &&
                    report.kl < kBalancedKl && stream.size() == 90302;
    return {ok, "sum " + full(sum) + ", Happily_Surprised " + full(hs) + ", KL " + fmt(report.kl)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 filter oracles", filters_vs_brute_force},
        {"2 gradient check", gradient_check},
        {"3 metric oracles", metric_oracles},
        {"4 AU threshold joint search", threshold_joint_search},
        {"5 blend exhaustive scan", blend_exhaustive},
        {"6 smoothing benefit", smoothing_benefit},
        {"7 H <= G <= A", mean_inequality},
        {"8 end-to-end determinism", determinism},
        {"9 compound reference distribution", reference_distribution_check},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome r;
        try {
            r = check();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        failed += !r.pass;
        std::cout << (r.pass ? "PASS " : "FAIL ") << name << ": " << r.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
