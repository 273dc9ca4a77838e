#pragma once

// Pipeline commands behind the CLI. Each command reads its inputs from the
// paths named in the config, writes its outputs under `out_dir` and returns a
// short human-readable summary. Keys are documented in docs/cli.md.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "affpipe/au_threshold.hpp"
#include "affpipe/compound.hpp"
#include "affpipe/config.hpp"
#include "affpipe/ensemble.hpp"
#include "affpipe/metrics.hpp"
#include "affpipe/mtl_head.hpp"
#include "affpipe/synth.hpp"
#include "affpipe/temporal_filters.hpp"

namespace affpipe {

struct RunContext {
    Config config;
    std::filesystem::path out_dir = ".";
    std::uint64_t seed = 0;
};

// Typed views of config sections (exposed for tests).
SynthSpec synth_spec_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg, std::uint64_t seed);
FilterSpec filter_from(const Config& cfg, const std::string& prefix, FilterSpec fallback);
TaskFilters task_filters_from(const Config& cfg);
CompoundOptions compound_options_from(const Config& cfg);
AuThresholds thresholds_from(const Config& cfg);

struct CurvePoint {
    double variance;
    int half_width;
    MtlScore score;
};

// Gaussian smoothing of EXPR and VA at each variance (k = ceil(3 sigma)), AU
// left unsmoothed; scores against the labels.
std::vector<CurvePoint> smoothing_curve(const PredictionTable& predictions, const LabelMap& labels,
                                        std::span<const double> variances, const AuThresholds& thresholds);

std::string cmd_synth(const RunContext& ctx);
std::string cmd_train(const RunContext& ctx);
std::string cmd_predict(const RunContext& ctx);
std::string cmd_smooth(const RunContext& ctx);
std::string cmd_blend(const RunContext& ctx);
std::string cmd_tune_au(const RunContext& ctx);
std::string cmd_tune_blend(const RunContext& ctx);
std::string cmd_eval(const RunContext& ctx);
std::string cmd_compound(const RunContext& ctx);
std::string cmd_report(const RunContext& ctx);

// Writes the aligned text table and the metric,value CSV.
std::string format_score_table(const MtlScore& score);
void write_score_csv(const std::filesystem::path& path, const MtlScore& score);

}  // namespace affpipe
