#pragma once

// Shared test helpers: scratch directories, file I/O, and reference
// implementations written without touching the library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "affpipe/compound.hpp"
#include "affpipe/datamodel.hpp"
#include "affpipe/mtl_head.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("affpipe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// ---------------------------------------------------------------------------
// Filters: direct double loops over every pair of frames.

inline std::vector<double> brute_box(const std::vector<std::int64_t>& frames, const std::vector<double>& values,
                                     std::size_t dim, int k) {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
            double num = 0.0;
            int count = 0;
            for (std::size_t j = 0; j < frames.size(); ++j) {
                if (std::llabs(frames[j] - frames[i]) <= k) {
                    num += values[j * dim + c];
                    ++count;
                }
            }
            out[i * dim + c] = num / count;
        }
    }
    return out;
}

inline std::vector<double> brute_gauss(const std::vector<std::int64_t>& frames, const std::vector<double>& values,
                                       std::size_t dim, int k, double var) {
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        for (std::size_t c = 0; c < dim; ++c) {
            double num = 0.0, den = 0.0;
            for (std::size_t j = 0; j < frames.size(); ++j) {
                const double d = static_cast<double>(frames[j] - frames[i]);
                if (std::fabs(d) <= k) {
                    const double w = std::exp(-d * d / (2.0 * var));
                    num += w * values[j * dim + c];
                    den += w;
                }
            }
            out[i * dim + c] = num / den;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics.

inline double oracle_ccc(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double vx = 0, vy = 0, cxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
        cxy += (x[i] - mx) * (y[i] - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    const double den = vx + vy + (mx - my) * (mx - my);
    return den < 1e-12 ? 0.0 : 2.0 * cxy / den;
}

inline double oracle_f1(long tp, long fp, long fn) {
    const long den = 2 * tp + fp + fn;
    return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

inline double oracle_macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int classes) {
    std::vector<std::vector<long>> confusion(classes, std::vector<long>(classes, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) ++confusion[truth[i]][pred[i]];
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) {
        long tp = confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < classes; ++o) {
            if (o == c) continue;
            fp += confusion[o][c];
            fn += confusion[c][o];
        }
        sum += oracle_f1(tp, fp, fn);
    }
    return sum / classes;
}

// Mean over AUs of binary F1; labels < 0 are missing.
inline double oracle_au_f1(const std::vector<std::array<int, affpipe::kNumAu>>& pred,
                           const std::vector<std::array<int, affpipe::kNumAu>>& truth) {
    double sum = 0.0;
    for (std::size_t a = 0; a < affpipe::kNumAu; ++a) {
        long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (truth[i][a] < 0) continue;
            tp += pred[i][a] == 1 && truth[i][a] == 1;
            fp += pred[i][a] == 1 && truth[i][a] == 0;
            fn += pred[i][a] == 0 && truth[i][a] == 1;
        }
        sum += oracle_f1(tp, fp, fn);
    }
    return sum / affpipe::kNumAu;
}

inline double oracle_kl(const std::vector<double>& ref, const std::vector<double>& pred, double eps) {
    double kl = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        if (ref[i] == 0.0) continue;
        kl += ref[i] * std::log(ref[i] / std::max(pred[i], eps));
    }
    return std::max(kl, 0.0);
}

inline double oracle_kappa(const std::vector<int>& a, const std::vector<int>& b, int classes) {
    const double n = static_cast<double>(a.size());
    double agree = 0.0;
    std::vector<double> ca(classes, 0.0), cb(classes, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += a[i] == b[i];
        ca[a[i]] += 1.0;
        cb[b[i]] += 1.0;
    }
    const double po = agree / n;
    double pe = 0.0;
    for (int c = 0; c < classes; ++c) pe += (ca[c] / n) * (cb[c] / n);
    if (pe >= 1.0) return po == 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

// ---------------------------------------------------------------------------
// Head: straight-line forward pass.

inline affpipe::PredictionSet oracle_forward(const affpipe::HeadParams& p, const affpipe::FrameRecord& r) {
    std::vector<double> in(r.embedding);
    in.insert(in.end(), r.scores.begin(), r.scores.end());
    std::vector<double> h(p.hidden_width);
    for (std::size_t j = 0; j < p.hidden_width; ++j) {
        double z = p.hidden.bias[j];
        for (std::size_t i = 0; i < in.size(); ++i) z += p.hidden.weights[j * in.size() + i] * in[i];
        h[j] = z > 0 ? z : 0.0;
    }
    affpipe::PredictionSet out;
    std::array<double, affpipe::kNumExpr> z{};
    for (std::size_t c = 0; c < affpipe::kNumExpr; ++c) {
        z[c] = p.expr.bias[c];
        for (std::size_t j = 0; j < p.hidden_width; ++j) z[c] += p.expr.weights[c * p.hidden_width + j] * h[j];
    }
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t c = 0; c < affpipe::kNumExpr; ++c) total += std::exp(z[c] - top);
    for (std::size_t c = 0; c < affpipe::kNumExpr; ++c) out.expr[c] = std::exp(z[c] - top) / total;
    for (std::size_t a = 0; a < affpipe::kNumAu; ++a) {
        double za = p.au.bias[a];
        for (std::size_t j = 0; j < p.hidden_width; ++j) za += p.au.weights[a * p.hidden_width + j] * h[j];
        out.au[a] = 1.0 / (1.0 + std::exp(-za));
    }
    for (std::size_t d = 0; d < 2; ++d) {
        double zv = p.va.bias[d];
        for (std::size_t i = 0; i < affpipe::kNumScores; ++i) zv += p.va.weights[d * affpipe::kNumScores + i] * r.scores[i];
        out.va[d] = std::tanh(zv);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random fixtures.

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) s += x = e(rng);
    for (double& x : v) x /= s;
    return v;
}

inline affpipe::PredictionSet random_prediction(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    affpipe::PredictionSet p;
    p.va = {2 * u(rng) - 1, 2 * u(rng) - 1};
    const auto s = random_simplex(rng, affpipe::kNumExpr);
    std::copy(s.begin(), s.end(), p.expr.begin());
    for (double& a : p.au) a = u(rng);
    return p;
}

inline affpipe::HeadParams random_params(std::mt19937_64& rng, std::size_t dim, std::size_t hidden, double scale = 0.5) {
    std::normal_distribution<double> g(0.0, scale);
    affpipe::HeadParams p(dim, hidden);
    p.for_each_layer([&](const char*, affpipe::DenseLayer& l) {
        for (double& w : l.weights) w = g(rng);
        for (double& b : l.bias) b = g(rng);
    });
    return p;
}

inline affpipe::FrameRecord random_record(std::mt19937_64& rng, std::size_t dim, std::int64_t frame = 1) {
    std::normal_distribution<double> g(0.0, 1.0);
    affpipe::FrameRecord r;
    r.video_id = "v";
    r.frame = frame;
    r.embedding.resize(dim);
    for (double& x : r.embedding) x = g(rng);
    for (std::size_t k = 0; k < affpipe::kNumExpr; ++k) r.scores[k] = g(rng);
    r.scores[affpipe::kNumExpr] = std::tanh(g(rng));
    r.scores[affpipe::kNumExpr + 1] = std::tanh(g(rng));
    return r;
}

}  // namespace testing
