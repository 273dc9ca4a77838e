#include "affpipe/au_threshold.hpp"

#include <numeric>
#include <sstream>

#include "affpipe/error.hpp"
#include "affpipe/metrics.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

AuThresholds::AuThresholds() { values_.fill(0.5); }

AuThresholds::AuThresholds(const std::array<double, kNumAu>& values) : values_(values) {
    for (std::size_t i = 0; i < kNumAu; ++i)
        if (!(values_[i] > 0.0 && values_[i] < 1.0))
            fail(ErrorKind::Validation, "threshold for au" + std::to_string(kAuIds[i]) +
                                            " must lie in (0, 1), got " + format_double(values_[i]));
}

AuThresholds AuThresholds::uniform(double t) {
    std::array<double, kNumAu> v;
    v.fill(t);
    return AuThresholds(v);
}

AuDecisions apply_thresholds(const AuScores& scores, const AuThresholds& thresholds) {
    AuDecisions out{};
    for (std::size_t i = 0; i < kNumAu; ++i) out[i] = scores[i] >= thresholds[i] ? 1 : 0;
    return out;
}

std::vector<double> default_threshold_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 9; ++i) g.push_back(i / 10.0);
    return g;
}

double ThresholdTuning::mean_f1() const {
    return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(kNumAu);
}

double au_f1_at(std::span<const AuScores> scores, std::span<const AuLabels> labels, std::size_t au,
                double threshold) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t n = 0; n < scores.size(); ++n) {
        const auto y = labels[n][au];
        if (y == kAuMissing) continue;
        const bool pred = scores[n][au] >= threshold;
        if (pred && y == 1) ++tp;
        else if (pred) ++fp;
        else if (y == 1) ++fn;
    }
    return binary_f1(tp, fp, fn);
}

ThresholdTuning tune_thresholds(std::span<const AuScores> scores, std::span<const AuLabels> labels,
                                std::span<const double> grid) {
    require(!grid.empty(), "threshold grid is empty");
    require(scores.size() == labels.size(), "AU scores and labels differ in length");
    for (double t : grid) require(t > 0.0 && t < 1.0, "threshold grid values must lie in (0, 1)");

    ThresholdTuning out;
    std::array<double, kNumAu> chosen;
    chosen.fill(0.5);
    for (std::size_t au = 0; au < kNumAu; ++au) {
        std::size_t pos = 0, neg = 0;
        for (const auto& l : labels) {
            if (l[au] == 1) ++pos;
            else if (l[au] == 0) ++neg;
        }
        if (pos == 0 || neg == 0) {
            out.degenerate[au] = true;
            out.f1[au] = au_f1_at(scores, labels, au, 0.5);
            continue;
        }
        // Ties resolve to the smallest threshold regardless of grid order.
        double best_t = 0.0, best_f1 = -1.0;
        for (double t : grid) {
            const double f1 = au_f1_at(scores, labels, au, t);
            if (f1 > best_f1 || (f1 == best_f1 && t < best_t)) {
                best_f1 = f1;
                best_t = t;
            }
        }
        chosen[au] = best_t;
        out.f1[au] = best_f1;
    }
    out.thresholds = AuThresholds(chosen);
    return out;
}

void save_thresholds(const std::filesystem::path& path, const AuThresholds& thresholds) {
    auto out = open_output(path);
    for (std::size_t i = 0; i < kNumAu; ++i)
        out << "au" << kAuIds[i] << ' ' << format_double(thresholds[i]) << '\n';
    out.close();
    if (!out) fail(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

AuThresholds load_thresholds(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::array<double, kNumAu> values{};
    std::array<bool, kNumAu> seen{};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream fields{std::string(t)};
        std::string key, value, extra;
        if (!(fields >> key >> value) || (fields >> extra))
            fail(ErrorKind::Parse, path.string() + ": line " + std::to_string(line_no) + ": expected 'au<id> <value>'");
        std::size_t slot = kNumAu;
        for (std::size_t i = 0; i < kNumAu; ++i)
            if (key == "au" + std::to_string(kAuIds[i])) slot = i;
        if (slot == kNumAu) fail(ErrorKind::Schema, path.string() + ": unknown AU key '" + key + "'");
        if (seen[slot]) fail(ErrorKind::Validation, path.string() + ": duplicate key '" + key + "'");
        seen[slot] = true;
        values[slot] = parse_double(value, line_no, key);
    }
    for (std::size_t i = 0; i < kNumAu; ++i)
        if (!seen[i]) fail(ErrorKind::Schema, path.string() + ": missing au" + std::to_string(kAuIds[i]));
    return AuThresholds(values);
}

}  // namespace affpipe
