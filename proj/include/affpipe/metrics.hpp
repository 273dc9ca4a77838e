#pragma once

// Evaluation statistics: concordance correlation, F1 variants, the composite
// multi-task score, KL divergence and Cohen's kappa.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "affpipe/au_threshold.hpp"
#include "affpipe/datamodel.hpp"

namespace affpipe {

// A statistic together with a flag set when a degenerate convention applied
// (zero denominator, epsilon flooring, absent class).
struct FlaggedValue {
    double value = 0.0;
    bool degenerate = false;
};

// Concordance correlation with population (1/N) moments. Requires equal
// lengths >= 2. Returns {0, true} if the denominator is below 1e-12.
FlaggedValue ccc(std::span<const double> x, std::span<const double> y);

double pearson(std::span<const double> x, std::span<const double> y);

// F1 of the positive class. 0/0 is defined as 0.
double binary_f1(std::size_t tp, std::size_t fp, std::size_t fn);

struct MacroF1 {
    double value = 0.0;
    std::vector<double> per_class;
    std::vector<bool> absent;  // class neither predicted nor labeled
    bool any_absent() const;
};

// Unweighted mean of per-class F1 over `num_classes` classes.
MacroF1 macro_f1(std::span<const int> predicted, std::span<const int> actual,
                 std::size_t num_classes = kNumExpr);

double accuracy(std::span<const int> predicted, std::span<const int> actual);

struct AuF1 {
    double value = 0.0;  // mean over the 12 AUs
    std::array<double, kNumAu> per_au{};
};

// Mean binary F1 over AUs. Missing labels are excluded from the counts.
AuF1 p_au(std::span<const AuDecisions> predicted, std::span<const AuLabels> actual);

struct MtlScore {
    double ccc_v = 0.0;
    double ccc_a = 0.0;
    double p_va = 0.0;
    double p_expr = 0.0;
    double p_au = 0.0;
    double p_mtl = 0.0;
    bool has_va = true;
    bool has_expr = true;
    bool has_au = true;
    std::size_t frames_va = 0;
    std::size_t frames_expr = 0;
    std::size_t frames_au = 0;
};

struct EvalOptions {
    // When false, a task without labeled frames is a Contract error; when
    // true it is reported absent and left out of p_mtl.
    bool allow_missing_tasks = false;
};

int argmax(std::span<const double> values);

MtlScore evaluate_mtl(const PredictionTable& predictions, const LabelMap& labels,
                      const AuThresholds& thresholds, const EvalOptions& options = {});

inline constexpr double kKlEpsilon = 1e-9;

// KL(reference || predicted) with predicted entries floored at epsilon.
// Both inputs must be non-negative and sum to 1 within 1e-6.
FlaggedValue kl_divergence(std::span<const double> reference, std::span<const double> predicted,
                           double epsilon = kKlEpsilon);

FlaggedValue cohen_kappa(std::span<const int> a, std::span<const int> b);

// Pairwise kappa over M label sequences of equal length.
std::vector<std::vector<double>> kappa_matrix(const std::vector<std::vector<int>>& raters);

}  // namespace affpipe
