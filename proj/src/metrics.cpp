#include "affpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affpipe/error.hpp"

namespace affpipe {

namespace {

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Moments {
    double mx, my, sxx, syy, sxy;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
    Moments m{mean(x), mean(y), 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - m.mx, dy = y[i] - m.my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    const double n = static_cast<double>(x.size());
    m.sxx /= n;
    m.syy /= n;
    m.sxy /= n;
    return m;
}

}  // namespace

FlaggedValue ccc(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "ccc: sequences differ in length");
    require(x.size() >= 2, "ccc: need at least two values");
    const auto m = moments(x, y);
    const double d = m.mx - m.my;
    const double denom = m.sxx + m.syy + d * d;
    if (denom < 1e-12) return {0.0, true};
    return {2.0 * m.sxy / denom, false};
}

double pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "pearson: need equal lengths >= 2");
    const auto m = moments(x, y);
    const double denom = std::sqrt(m.sxx * m.syy);
    return denom > 0.0 ? m.sxy / denom : 0.0;
}

double binary_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

bool MacroF1::any_absent() const {
    return std::find(absent.begin(), absent.end(), true) != absent.end();
}

MacroF1 macro_f1(std::span<const int> predicted, std::span<const int> actual, std::size_t num_classes) {
    require(predicted.size() == actual.size(), "macro_f1: sequences differ in length");
    require(!actual.empty(), "macro_f1: no labeled frames");
    std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const auto p = static_cast<std::size_t>(predicted[i]);
        const auto a = static_cast<std::size_t>(actual[i]);
        require(p < num_classes && a < num_classes, "macro_f1: class index out of range");
        if (p == a) {
            ++tp[p];
        } else {
            ++fp[p];
            ++fn[a];
        }
    }
    MacroF1 out;
    out.per_class.resize(num_classes);
    out.absent.resize(num_classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        out.per_class[c] = binary_f1(tp[c], fp[c], fn[c]);
        out.absent[c] = tp[c] + fp[c] + fn[c] == 0;
        sum += out.per_class[c];
    }
    out.value = sum / static_cast<double>(num_classes);
    return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> actual) {
    require(predicted.size() == actual.size() && !actual.empty(), "accuracy: need equal non-empty sequences");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) hits += predicted[i] == actual[i];
    return static_cast<double>(hits) / static_cast<double>(actual.size());
}

AuF1 p_au(std::span<const AuDecisions> predicted, std::span<const AuLabels> actual) {
    require(predicted.size() == actual.size(), "p_au: sequences differ in length");
    std::array<std::size_t, kNumAu> tp{}, fp{}, fn{};
    std::size_t labeled = 0;
    for (std::size_t n = 0; n < actual.size(); ++n) {
        for (std::size_t i = 0; i < kNumAu; ++i) {
            const auto y = actual[n][i];
            if (y == kAuMissing) continue;
            ++labeled;
            const bool p = predicted[n][i] != 0;
            if (p && y == 1) ++tp[i];
            else if (p) ++fp[i];
            else if (y == 1) ++fn[i];
        }
    }
    require(labeled > 0, "p_au: no labeled AU values");
    AuF1 out;
    double sum = 0.0;
    for (std::size_t i = 0; i < kNumAu; ++i) {
        out.per_au[i] = binary_f1(tp[i], fp[i], fn[i]);
        sum += out.per_au[i];
    }
    out.value = sum / static_cast<double>(kNumAu);
    return out;
}

int argmax(std::span<const double> values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

MtlScore evaluate_mtl(const PredictionTable& predictions, const LabelMap& labels,
                      const AuThresholds& thresholds, const EvalOptions& options) {
    std::vector<double> pv, pa, yv, ya;
    std::vector<int> pe, ye;
    std::vector<AuDecisions> pu;
    std::vector<AuLabels> yu;
    // Walks the label map in key order, so the result does not depend on
    // the order in which predictions were produced.
    for (const auto& [key, l] : labels) {
        const auto* p = find_prediction(predictions, key);
        if (p == nullptr) continue;
        if (l.va) {
            pv.push_back(p->va[0]);
            pa.push_back(p->va[1]);
            yv.push_back((*l.va)[0]);
            ya.push_back((*l.va)[1]);
        }
        if (l.expression) {
            pe.push_back(argmax(p->expr));
            ye.push_back(*l.expression);
        }
        if (l.has_any_au()) {
            pu.push_back(apply_thresholds(p->au, thresholds));
            yu.push_back(l.aus);
        }
    }

    MtlScore s;
    s.frames_va = yv.size();
    s.frames_expr = ye.size();
    s.frames_au = yu.size();
    auto missing = [&](const char* task) {
        if (!options.allow_missing_tasks)
            fail(ErrorKind::Contract, std::string("evaluate: no labeled frames for task ") + task);
    };
    if (yv.size() >= 2) {
        s.ccc_v = ccc(pv, yv).value;
        s.ccc_a = ccc(pa, ya).value;
        s.p_va = (s.ccc_v + s.ccc_a) / 2.0;
    } else {
        missing("VA");
        s.has_va = false;
    }
    if (!ye.empty()) {
        s.p_expr = macro_f1(pe, ye).value;
    } else {
        missing("EXPR");
        s.has_expr = false;
    }
    if (!yu.empty()) {
        s.p_au = p_au(pu, yu).value;
    } else {
        missing("AU");
        s.has_au = false;
    }
    s.p_mtl = s.p_va + s.p_expr + s.p_au;
    return s;
}

FlaggedValue kl_divergence(std::span<const double> reference, std::span<const double> predicted,
                           double epsilon) {
    require(reference.size() == predicted.size() && !reference.empty(),
            "kl_divergence: distributions differ in size");
    require(epsilon > 0.0, "kl_divergence: epsilon must be positive");
    auto check = [](std::span<const double> p, const char* which) {
        double sum = 0.0;
        for (double v : p) {
            require(v >= 0.0 && std::isfinite(v), std::string("kl_divergence: negative entry in ") + which);
            sum += v;
        }
        require(std::abs(sum - 1.0) <= 1e-6, std::string("kl_divergence: ") + which + " does not sum to 1");
    };
    check(reference, "reference");
    check(predicted, "predicted");

    FlaggedValue out;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        if (reference[i] == 0.0) continue;
        double q = predicted[i];
        if (q < epsilon) {
            q = epsilon;
            out.degenerate = true;
        }
        out.value += reference[i] * std::log(reference[i] / q);
    }
    // Rounding can leave a tiny negative total for equal inputs.
    out.value = std::max(out.value, 0.0);
    return out;
}

FlaggedValue cohen_kappa(std::span<const int> a, std::span<const int> b) {
    require(a.size() == b.size() && !a.empty(), "cohen_kappa: need equal non-empty sequences");
    const int hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
    const int lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
    require(lo >= 0, "cohen_kappa: negative class index");
    const auto k = static_cast<std::size_t>(hi) + 1;
    std::vector<double> ca(k), cb(k);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[static_cast<std::size_t>(a[i])] += 1.0;
        cb[static_cast<std::size_t>(b[i])] += 1.0;
        agree += a[i] == b[i];
    }
    const double n = static_cast<double>(a.size());
    const double po = static_cast<double>(agree) / n;
    double pe = 0.0;
    for (std::size_t c = 0; c < k; ++c) pe += (ca[c] / n) * (cb[c] / n);
    if (pe >= 1.0) return {po == 1.0 ? 1.0 : 0.0, true};
    return {(po - pe) / (1.0 - pe), false};
}

std::vector<std::vector<double>> kappa_matrix(const std::vector<std::vector<int>>& raters) {
    const std::size_t m = raters.size();
    std::vector<std::vector<double>> out(m, std::vector<double>(m, 1.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) out[i][j] = out[j][i] = cohen_kappa(raters[i], raters[j]).value;
    return out;
}

}  // namespace affpipe
