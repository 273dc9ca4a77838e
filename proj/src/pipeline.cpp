#include "affpipe/pipeline.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "affpipe/error.hpp"
#include "affpipe/random.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

namespace {

std::filesystem::path output_path(const RunContext& ctx, const std::string& default_name) {
    return ctx.out_dir / ctx.config.get_string("output.name", default_name);
}

std::filesystem::path input_path(const Config& cfg, const std::string& key) {
    return std::filesystem::path(cfg.require_string(key));
}

std::size_t positive(std::int64_t v, const std::string& key) {
    if (v <= 0) fail(ErrorKind::Validation, "setting '" + key + "' must be positive");
    return static_cast<std::size_t>(v);
}

template <std::size_t N>
std::optional<std::array<double, N>> fixed_list(const Config& cfg, const std::string& key) {
    auto raw = cfg.find(key);
    if (!raw || *raw == "auto") return std::nullopt;
    const auto values = cfg.get_doubles(key, {});
    if (values.size() != N)
        fail(ErrorKind::Validation, "setting '" + key + "' needs " + std::to_string(N) + " values");
    std::array<double, N> out;
    std::copy(values.begin(), values.end(), out.begin());
    return out;
}

std::string summarize(const MtlScore& s) {
    std::ostringstream os;
    os << "P_VA=" << format_double(s.p_va) << " P_EXPR=" << format_double(s.p_expr)
       << " P_AU=" << format_double(s.p_au) << " P_MTL=" << format_double(s.p_mtl);
    return os.str();
}

}  // namespace

SynthSpec synth_spec_from(const Config& cfg) {
    SynthSpec s;
    s.tracks = positive(cfg.get_int("synth.tracks", static_cast<std::int64_t>(s.tracks)), "synth.tracks");
    s.length = positive(cfg.get_int("synth.length", static_cast<std::int64_t>(s.length)), "synth.length");
    s.dim = positive(cfg.get_int("synth.dim", static_cast<std::int64_t>(s.dim)), "synth.dim");
    s.noise = cfg.get_double("synth.noise", s.noise);
    s.embedding_noise = cfg.get_double("synth.embedding_noise", s.embedding_noise);
    s.logit_gain = cfg.get_double("synth.logit_gain", s.logit_gain);
    s.min_segment = positive(cfg.get_int("synth.min_segment", static_cast<std::int64_t>(s.min_segment)), "synth.min_segment");
    s.max_segment = positive(cfg.get_int("synth.max_segment", static_cast<std::int64_t>(s.max_segment)), "synth.max_segment");
    s.missing_va = cfg.get_double("synth.missing_va", s.missing_va);
    s.missing_expr = cfg.get_double("synth.missing_expr", s.missing_expr);
    s.missing_au = cfg.get_double("synth.missing_au", s.missing_au);
    s.au_flip = cfg.get_double("synth.au_flip", s.au_flip);
    s.extra_face = cfg.get_double("synth.extra_face", s.extra_face);
    s.faceless = cfg.get_double("synth.faceless", s.faceless);
    s.prefix = cfg.get_string("synth.prefix", s.prefix);
    s.validate();
    return s;
}

TrainConfig train_config_from(const Config& cfg, std::uint64_t seed) {
    TrainConfig c;
    c.seed = seed;
    c.hidden_width = positive(cfg.get_int("head.hidden_width", static_cast<std::int64_t>(c.hidden_width)), "head.hidden_width");
    c.learning_rate = cfg.get_double("head.learning_rate", c.learning_rate);
    c.momentum = cfg.get_double("head.momentum", c.momentum);
    c.epochs = static_cast<int>(cfg.get_int("head.epochs", c.epochs));
    c.batch_size = positive(cfg.get_int("head.batch_size", static_cast<std::int64_t>(c.batch_size)), "head.batch_size");
    c.task_weights.va = cfg.get_double("head.lambda_va", c.task_weights.va);
    c.task_weights.expr = cfg.get_double("head.lambda_expr", c.task_weights.expr);
    c.task_weights.au = cfg.get_double("head.lambda_au", c.task_weights.au);
    if (auto w = fixed_list<kNumExpr>(cfg, "head.class_weights")) c.expr_class_weights = *w;
    if (auto w = fixed_list<kNumAu>(cfg, "head.au_pos_weights")) c.au_pos_weights = *w;
    c.validate();
    return c;
}

FilterSpec filter_from(const Config& cfg, const std::string& prefix, FilterSpec fallback) {
    const auto kind = cfg.get_string(prefix + ".kind", "");
    if (kind.empty()) return fallback;
    if (kind == "none") return FilterSpec::identity();
    const double variance = cfg.get_double(prefix + ".variance", 1.0);
    if (kind == "gaussian") {
        if (!(variance > 0.0)) fail(ErrorKind::Validation, "setting '" + prefix + ".variance' must be positive");
        const auto k = cfg.get_int(prefix + ".k", default_half_width(variance));
        if (k < 0) fail(ErrorKind::Validation, "setting '" + prefix + ".k' must be non-negative");
        return FilterSpec::gaussian(static_cast<int>(k), variance);
    }
    if (kind == "box") {
        const auto k = cfg.get_int(prefix + ".k", 0);
        if (k < 0) fail(ErrorKind::Validation, "setting '" + prefix + ".k' must be non-negative");
        return FilterSpec::box(static_cast<int>(k));
    }
    fail(ErrorKind::Validation, "setting '" + prefix + ".kind' must be box, gaussian or none");
}

TaskFilters task_filters_from(const Config& cfg) {
    return {filter_from(cfg, "filter.va", FilterSpec::identity()),
            filter_from(cfg, "filter.expr", FilterSpec::identity()),
            filter_from(cfg, "filter.au", FilterSpec::identity())};
}

CompoundOptions compound_options_from(const Config& cfg) {
    CompoundOptions o;
    const auto mean = cfg.get_string("compound.mean", "A");
    const auto faces = cfg.get_string("compound.faces", "largest");
    auto m = mean_kind_from_name(mean);
    if (!m) fail(ErrorKind::Validation, "setting 'compound.mean' must be A, G or H");
    auto f = face_policy_from_name(faces);
    if (!f) fail(ErrorKind::Validation, "setting 'compound.faces' must be average_all or largest");
    o.mean = *m;
    o.faces = *f;
    o.filter = filter_from(cfg, "compound.filter", FilterSpec::identity());
    return o;
}

AuThresholds thresholds_from(const Config& cfg) {
    if (auto path = cfg.find("paths.thresholds"); path && !path->empty()) return load_thresholds(*path);
    return AuThresholds::uniform(cfg.get_double("au.threshold", 0.5));
}

std::vector<CurvePoint> smoothing_curve(const PredictionTable& predictions, const LabelMap& labels,
                                        std::span<const double> variances, const AuThresholds& thresholds) {
    EvalOptions opts{.allow_missing_tasks = true};
    std::vector<CurvePoint> out;
    for (double v : variances) {
        const auto spec = FilterSpec::gaussian(v);
        const auto smoothed = smooth_predictions(predictions, TaskFilters{spec, spec, FilterSpec::identity()});
        out.push_back({v, spec.half_width, evaluate_mtl(smoothed, labels, thresholds, opts)});
    }
    return out;
}

std::string cmd_synth(const RunContext& ctx) {
    auto spec = synth_spec_from(ctx.config);
    const auto data = synthesize(spec, ctx.seed);
    write_features(ctx.out_dir / "features.csv", data.features);
    write_labels(ctx.out_dir / "labels.csv", data.labels);
    write_faces(ctx.out_dir / "faces.csv", data.faces);
    write_compound_labels(ctx.out_dir / "compound_truth.csv", data.compound_truth);

    const auto val_tracks = ctx.config.get_int("synth.validation_tracks", 0);
    if (val_tracks < 0) fail(ErrorKind::Validation, "setting 'synth.validation_tracks' must be non-negative");
    if (val_tracks > 0) {
        auto val_spec = spec;
        val_spec.tracks = static_cast<std::size_t>(val_tracks);
        val_spec.prefix = "val";
        const auto val = synthesize(val_spec, ctx.seed);
        write_features(ctx.out_dir / "val_features.csv", val.features);
        write_labels(ctx.out_dir / "val_labels.csv", val.labels);
        write_faces(ctx.out_dir / "val_faces.csv", val.faces);
        write_compound_labels(ctx.out_dir / "val_compound_truth.csv", val.compound_truth);
    }

    auto log = open_output(ctx.out_dir / "synth_params.txt");
    log << "seed = " << ctx.seed << '\n'
        << "synth.tracks = " << spec.tracks << '\n'
        << "synth.length = " << spec.length << '\n'
        << "synth.dim = " << spec.dim << '\n'
        << "synth.noise = " << format_double(spec.noise) << '\n'
        << "synth.embedding_noise = " << format_double(spec.embedding_noise) << '\n'
        << "synth.logit_gain = " << format_double(spec.logit_gain) << '\n'
        << "synth.min_segment = " << spec.min_segment << '\n'
        << "synth.max_segment = " << spec.max_segment << '\n'
        << "synth.missing_va = " << format_double(spec.missing_va) << '\n'
        << "synth.missing_expr = " << format_double(spec.missing_expr) << '\n'
        << "synth.missing_au = " << format_double(spec.missing_au) << '\n'
        << "synth.au_flip = " << format_double(spec.au_flip) << '\n'
        << "synth.extra_face = " << format_double(spec.extra_face) << '\n'
        << "synth.faceless = " << format_double(spec.faceless) << '\n'
        << "synth.prefix = " << spec.prefix << '\n'
        << "synth.validation_tracks = " << val_tracks << '\n';
    log.close();

    return "wrote " + std::to_string(data.features.frame_count()) + " frames in " +
           std::to_string(data.features.tracks.size()) + " tracks to " + ctx.out_dir.string();
}

std::string cmd_train(const RunContext& ctx) {
    auto config = train_config_from(ctx.config, ctx.seed);
    const auto features = load_features(input_path(ctx.config, "paths.features"));
    const auto labels = load_labels(input_path(ctx.config, "paths.labels"));
    const auto frames = join(features, labels);
    const auto defaults = default_loss_weights(frames);
    if (!fixed_list<kNumExpr>(ctx.config, "head.class_weights")) config.expr_class_weights = defaults.expr_class_weights;
    if (!fixed_list<kNumAu>(ctx.config, "head.au_pos_weights")) config.au_pos_weights = defaults.au_pos_weights;

    const auto result = train(frames, features.dim, config);
    save_params(output_path(ctx, "head.weights"), result.params);

    const std::vector<std::string> header{"epoch", "loss"};
    CsvWriter log(ctx.out_dir / "train_log.csv", header);
    log.field(std::int64_t{0}).field(result.initial_loss).end_row();
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
        log.field(static_cast<std::int64_t>(e + 1)).field(result.epoch_loss[e]).end_row();
    log.close();

    return "trained on " + std::to_string(frames.size()) + " labeled frames; loss " +
           format_double(result.initial_loss) + " -> " + format_double(result.epoch_loss.back());
}

std::string cmd_predict(const RunContext& ctx) {
    const auto features = load_features(input_path(ctx.config, "paths.features"));
    const auto params = load_params(input_path(ctx.config, "paths.weights"), features.dim);
    const auto table = predict(params, features);
    const auto out = output_path(ctx, "predictions.csv");
    write_predictions(out, table);
    return "wrote predictions for " + std::to_string(features.frame_count()) + " frames to " + out.string();
}

std::string cmd_smooth(const RunContext& ctx) {
    const auto filters = task_filters_from(ctx.config);
    const auto table = load_predictions(input_path(ctx.config, "paths.predictions"));
    const auto out = output_path(ctx, "predictions_smoothed.csv");
    write_predictions(out, smooth_predictions(table, filters));
    return "wrote smoothed predictions to " + out.string();
}

std::string cmd_blend(const RunContext& ctx) {
    BlendWeights w;
    if (auto path = ctx.config.find("paths.blend_weights"); path && !path->empty()) {
        w = load_blend_weights(*path);
    } else {
        w.va = ctx.config.get_double("blend.va", w.va);
        w.expr = ctx.config.get_double("blend.expr", w.expr);
        w.au = ctx.config.get_double("blend.au", w.au);
        w.validate();
    }
    const auto first = load_predictions(input_path(ctx.config, "paths.predictions"));
    const auto second = load_predictions(input_path(ctx.config, "paths.predictions2"));
    const auto out = output_path(ctx, "predictions_blended.csv");
    write_predictions(out, blend(first, second, w));
    return "wrote blended predictions (w_va=" + format_double(w.va) + ", w_expr=" + format_double(w.expr) +
           ", w_au=" + format_double(w.au) + ") to " + out.string();
}

std::string cmd_tune_blend(const RunContext& ctx) {
    BlendTuneOptions opts;
    opts.step = ctx.config.get_double("blend.step", opts.step);
    opts.tune_va = ctx.config.get_bool("blend.tune_va", true);
    opts.tune_expr = ctx.config.get_bool("blend.tune_expr", true);
    opts.tune_au = ctx.config.get_bool("blend.tune_au", true);
    opts.au_thresholds = thresholds_from(ctx.config);
    const auto first = load_predictions(input_path(ctx.config, "paths.predictions"));
    const auto second = load_predictions(input_path(ctx.config, "paths.predictions2"));
    const auto labels = load_labels(input_path(ctx.config, "paths.labels"));
    const auto tuning = tune_blend_weights(first, second, labels, opts);

    const auto out = output_path(ctx, "blend_weights.txt");
    save_blend_weights(out, tuning);
    const std::vector<std::string> header{"task", "weight", "metric"};
    CsvWriter trace(ctx.out_dir / "blend_trace.csv", header);
    auto dump = [&](const char* task, const std::vector<GridPoint>& pts) {
        for (const auto& p : pts) trace.field(task).field(p.weight).field(p.metric).end_row();
    };
    dump("va", tuning.va_trace);
    dump("expr", tuning.expr_trace);
    dump("au", tuning.au_trace);
    trace.close();
    return "blend weights va=" + format_double(tuning.weights.va) + " expr=" + format_double(tuning.weights.expr) +
           " au=" + format_double(tuning.weights.au) + " written to " + out.string();
}

std::string cmd_tune_au(const RunContext& ctx) {
    const auto grid = ctx.config.get_doubles("au.grid", default_threshold_grid());
    const auto table = load_predictions(input_path(ctx.config, "paths.predictions"));
    const auto labels = load_labels(input_path(ctx.config, "paths.labels"));
    std::vector<AuScores> scores;
    std::vector<AuLabels> truth;
    for (const auto& [key, l] : labels) {
        if (!l.has_any_au()) continue;
        if (const auto* p = find_prediction(table, key)) {
            scores.push_back(p->au);
            truth.push_back(l.aus);
        }
    }
    const auto tuning = tune_thresholds(scores, truth, grid);
    const auto out = output_path(ctx, "au_thresholds.txt");
    save_thresholds(out, tuning.thresholds);

    std::ostringstream os;
    os << "tuned thresholds written to " << out.string() << "; mean AU F1 " << format_double(tuning.mean_f1());
    for (std::size_t i = 0; i < kNumAu; ++i)
        if (tuning.degenerate[i]) os << "; warning: au" << kAuIds[i] << " lacks both classes, kept 0.5";
    return os.str();
}

std::string format_score_table(const MtlScore& s) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "metric" << std::right << std::setw(14) << "value" << '\n';
    auto row = [&](const char* name, double v, bool present) {
        os << std::left << std::setw(10) << name << std::right << std::setw(14)
           << (present ? format_double(v) : std::string("absent")) << '\n';
    };
    row("ccc_v", s.ccc_v, s.has_va);
    row("ccc_a", s.ccc_a, s.has_va);
    row("p_va", s.p_va, s.has_va);
    row("p_expr", s.p_expr, s.has_expr);
    row("p_au", s.p_au, s.has_au);
    row("p_mtl", s.p_mtl, true);
    return os.str();
}

void write_score_csv(const std::filesystem::path& path, const MtlScore& s) {
    const std::vector<std::string> header{"metric", "value"};
    CsvWriter w(path, header);
    auto row = [&](const char* name, double v, bool present) {
        w.field(name);
        if (present) w.field(v);
        else w.empty();
        w.end_row();
    };
    row("ccc_v", s.ccc_v, s.has_va);
    row("ccc_a", s.ccc_a, s.has_va);
    row("p_va", s.p_va, s.has_va);
    row("p_expr", s.p_expr, s.has_expr);
    row("p_au", s.p_au, s.has_au);
    row("p_mtl", s.p_mtl, true);
    w.close();
}

std::string cmd_eval(const RunContext& ctx) {
    const auto table = load_predictions(input_path(ctx.config, "paths.predictions"));
    const auto labels = load_labels(input_path(ctx.config, "paths.labels"));
    EvalOptions opts{.allow_missing_tasks = ctx.config.get_bool("eval.allow_missing_tasks", false)};
    const auto score = evaluate_mtl(table, labels, thresholds_from(ctx.config), opts);
    const auto table_text = format_score_table(score);
    auto out = open_output(ctx.out_dir / "eval_report.txt");
    out << table_text;
    out.close();
    write_score_csv(ctx.out_dir / "eval_report.csv", score);
    return table_text + summarize(score);
}

std::string cmd_compound(const RunContext& ctx) {
    const auto options = compound_options_from(ctx.config);
    const auto videos = load_faces(input_path(ctx.config, "paths.faces"));
    std::vector<CompoundSequence> sequences;
    std::vector<CompoundClass> all_labels;
    std::size_t faceless_videos = 0;
    for (const auto& video : videos) {
        auto seq = predict_sequence(video, options);
        if (seq.all_faceless) ++faceless_videos;
        all_labels.insert(all_labels.end(), seq.labels.begin(), seq.labels.end());
        sequences.push_back(std::move(seq));
    }
    const auto out = output_path(ctx, "compound_labels.csv");
    write_compound_labels(out, sequences);

    std::ostringstream os;
    os << "wrote " << all_labels.size() << " compound labels to " << out.string();
    if (faceless_videos > 0) os << "; warning: " << faceless_videos << " video(s) without any face";
    if (!all_labels.empty()) {
        const auto balance = class_balance_report(all_labels);
        auto rep = open_output(ctx.out_dir / "class_balance.txt");
        rep << std::left << std::setw(24) << "class" << std::right << std::setw(10) << "count" << std::setw(14)
            << "predicted" << std::setw(14) << "reference" << '\n';
        const auto ref = reference_distribution();
        for (std::size_t c = 0; c < kNumCompound; ++c)
            rep << std::left << std::setw(24) << kCompoundNames[c] << std::right << std::setw(10) << balance.histogram[c]
                << std::setw(14) << std::setprecision(6) << std::fixed << balance.predicted[c] << std::setw(14)
                << ref[c] << '\n';
        rep << "kl " << format_double(balance.kl) << (balance.floored ? " (epsilon floor applied)" : "") << '\n';
        rep.close();
        os << "; KL(reference || predicted) = " << format_double(balance.kl);
    }
    return os.str();
}

std::string cmd_report(const RunContext& ctx) {
    const auto variances = ctx.config.get_doubles("report.variances", {0.5, 1, 2, 4, 8, 16});
    const auto table = load_predictions(input_path(ctx.config, "paths.predictions"));
    const auto labels = load_labels(input_path(ctx.config, "paths.labels"));
    const auto thresholds = thresholds_from(ctx.config);

    const auto frame_level = evaluate_mtl(table, labels, thresholds, EvalOptions{.allow_missing_tasks = true});
    const auto curve = smoothing_curve(table, labels, variances, thresholds);
    const std::vector<std::string> header{"sigma2", "k", "p_va", "p_expr", "p_au", "p_mtl"};
    const auto out = output_path(ctx, "smoothing_curve.csv");
    CsvWriter w(out, header);
    w.field(0.0).field(std::int64_t{0}).field(frame_level.p_va).field(frame_level.p_expr).field(frame_level.p_au)
        .field(frame_level.p_mtl).end_row();
    for (const auto& p : curve)
        w.field(p.variance).field(std::int64_t{p.half_width}).field(p.score.p_va).field(p.score.p_expr)
            .field(p.score.p_au).field(p.score.p_mtl).end_row();
    w.close();

    std::ostringstream os;
    os << "smoothing curve over " << curve.size() << " variances written to " << out.string();

    if (auto faces = ctx.config.find("paths.faces"); faces && !faces->empty()) {
        auto options = compound_options_from(ctx.config);
        const auto videos = load_faces(*faces);
        const std::vector<std::string> kl_header{"sigma2", "k", "kl"};
        CsvWriter kw(ctx.out_dir / "compound_curve.csv", kl_header);
        for (double v : variances) {
            options.filter = FilterSpec::gaussian(v);
            std::vector<CompoundClass> all;
            for (const auto& video : videos) {
                const auto seq = predict_sequence(video, options);
                all.insert(all.end(), seq.labels.begin(), seq.labels.end());
            }
            if (all.empty()) break;
            kw.field(v).field(std::int64_t{options.filter.half_width}).field(class_balance_report(all).kl).end_row();
        }
        kw.close();
        os << "; compound KL curve written to " << (ctx.out_dir / "compound_curve.csv").string();
    }
    return os.str();
}

}  // namespace affpipe
