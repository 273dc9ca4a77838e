#include "affpipe/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "affpipe/error.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

namespace {

const std::array<const char*, kNumExpr> kLogitColumns = {
    "logit_neutral", "logit_anger",   "logit_disgust",  "logit_fear",
    "logit_happiness", "logit_sadness", "logit_surprise", "logit_other"};

std::string au_column(std::size_t i) { return "au" + std::to_string(kAuIds[i]); }

void check_unit_range(double v, std::size_t line, const char* what, const std::string& file) {
    if (v < -1.0 || v > 1.0)
        fail(ErrorKind::Validation, file + ": line " + std::to_string(line) + ": " + what +
                                        " " + format_double(v) + " outside [-1, 1]");
}

}  // namespace

std::size_t FeatureSet::frame_count() const {
    return std::accumulate(tracks.begin(), tracks.end(), std::size_t{0},
                           [](std::size_t n, const VideoTrack& t) { return n + t.frames.size(); });
}

bool MtlLabels::has_any_au() const {
    return std::any_of(aus.begin(), aus.end(), [](std::int8_t a) { return a != kAuMissing; });
}

void validate_prediction(const PredictionSet& p, double simplex_tolerance) {
    for (double v : p.va)
        if (!(v >= -1.0 && v <= 1.0)) fail(ErrorKind::Validation, "valence/arousal prediction outside [-1, 1]");
    double sum = 0.0;
    for (double v : p.expr) {
        if (!(v >= 0.0)) fail(ErrorKind::Validation, "negative expression probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > simplex_tolerance)
        fail(ErrorKind::Validation, "expression probabilities sum to " + format_double(sum));
    for (double v : p.au)
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::Validation, "AU score outside [0, 1]");
}

std::vector<std::string> feature_header(std::size_t dim) {
    std::vector<std::string> h{"video_id", "frame"};
    for (std::size_t i = 0; i < dim; ++i) h.push_back("emb_" + std::to_string(i));
    for (const char* c : kLogitColumns) h.emplace_back(c);
    h.emplace_back("valence_raw");
    h.emplace_back("arousal_raw");
    return h;
}

FeatureSet group_features(std::size_t dim, std::vector<FrameRecord> rows) {
    std::sort(rows.begin(), rows.end(), [](const FrameRecord& a, const FrameRecord& b) {
        return std::tie(a.video_id, a.frame) < std::tie(b.video_id, b.frame);
    });
    FeatureSet out;
    out.dim = dim;
    for (auto& r : rows) {
        if (r.embedding.size() != dim)
            fail(ErrorKind::Schema, "embedding width " + std::to_string(r.embedding.size()) +
                                        " does not match dataset width " + std::to_string(dim));
        if (out.tracks.empty() || out.tracks.back().video_id != r.video_id) {
            out.tracks.push_back(VideoTrack{r.video_id, {}});
        } else if (out.tracks.back().frames.back().frame == r.frame) {
            fail(ErrorKind::Validation, "duplicate frame (" + r.video_id + ", " +
                                            std::to_string(r.frame) + ")");
        }
        out.tracks.back().frames.push_back(std::move(r));
    }
    return out;
}

FeatureSet load_features(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
    CsvReader reader(path);
    const auto& header = reader.header();
    if (header.size() < 2 + 1 + kNumScores)
        fail(ErrorKind::Schema, path.string() + ": header declares no embedding columns");
    const std::size_t dim = header.size() - 2 - kNumScores;
    reader.expect_header(feature_header(dim));
    if (expected_dim && *expected_dim != dim)
        fail(ErrorKind::Schema, path.string() + ": embedding width " + std::to_string(dim) +
                                    ", expected " + std::to_string(*expected_dim));

    std::vector<FrameRecord> rows;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        FrameRecord r;
        r.video_id = std::string(f[0]);
        if (r.video_id.empty()) fail(ErrorKind::Parse, path.string() + ": line " + std::to_string(line) + ": empty video_id");
        r.frame = parse_int(f[1], line, header[1]);
        if (r.frame < 0) fail(ErrorKind::Validation, path.string() + ": line " + std::to_string(line) + ": negative frame index");
        r.embedding.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) r.embedding[i] = parse_double(f[2 + i], line, header[2 + i]);
        for (std::size_t i = 0; i < kNumScores; ++i)
            r.scores[i] = parse_double(f[2 + dim + i], line, header[2 + dim + i]);
        check_unit_range(r.raw_valence(), line, "valence_raw", path.string());
        check_unit_range(r.raw_arousal(), line, "arousal_raw", path.string());
        rows.push_back(std::move(r));
    }
    return group_features(dim, std::move(rows));
}

void write_features(const std::filesystem::path& path, const FeatureSet& features) {
    const auto header = feature_header(features.dim);
    CsvWriter w(path, header);
    for (const auto& track : features.tracks) {
        for (const auto& r : track.frames) {
            w.field(r.video_id).field(r.frame);
            for (double v : r.embedding) w.field(v);
            for (double v : r.scores) w.field(v);
            w.end_row();
        }
    }
    w.close();
}

namespace {

std::vector<std::string> label_header() {
    std::vector<std::string> h{"video_id", "frame", "valence", "arousal", "expression"};
    for (std::size_t i = 0; i < kNumAu; ++i) h.push_back(au_column(i));
    return h;
}

}  // namespace

LabelMap load_labels(const std::filesystem::path& path) {
    CsvReader reader(path);
    const auto header = label_header();
    reader.expect_header(header);
    const std::string file = path.string();

    LabelMap out;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        auto at = [&](const std::string& msg) {
            return file + ": line " + std::to_string(line) + ": " + msg;
        };
        FrameKey key{std::string(f[0]), parse_int(f[1], line, "frame")};
        if (key.video_id.empty()) fail(ErrorKind::Parse, at("empty video_id"));
        if (key.frame < 0) fail(ErrorKind::Validation, at("negative frame index"));

        MtlLabels labels;
        auto v = parse_optional_double(f[2], line, "valence");
        auto a = parse_optional_double(f[3], line, "arousal");
        if (v.has_value() != a.has_value())
            fail(ErrorKind::Validation, at("valence and arousal must be both present or both empty"));
        if (v) {
            check_unit_range(*v, line, "valence", file);
            check_unit_range(*a, line, "arousal", file);
            labels.va = std::array<double, 2>{*v, *a};
        }
        if (!f[4].empty()) {
            auto e = parse_int(f[4], line, "expression");
            if (e < 0 || e >= static_cast<std::int64_t>(kNumExpr))
                fail(ErrorKind::Validation, at("expression " + std::to_string(e) + " outside 0..7"));
            labels.expression = static_cast<int>(e);
        }
        for (std::size_t i = 0; i < kNumAu; ++i) {
            if (f[5 + i].empty()) continue;
            auto x = parse_int(f[5 + i], line, header[5 + i]);
            if (x != 0 && x != 1) fail(ErrorKind::Validation, at(header[5 + i] + " must be 0 or 1"));
            labels.aus[i] = static_cast<std::int8_t>(x);
        }
        if (labels.empty()) fail(ErrorKind::Validation, at("row carries no labels"));
        if (!out.emplace(std::move(key), labels).second)
            fail(ErrorKind::Validation, at("duplicate (video_id, frame)"));
    }
    return out;
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
    CsvWriter w(path, label_header());
    for (const auto& [key, l] : labels) {
        w.field(key.video_id).field(key.frame);
        if (l.va) {
            w.field((*l.va)[0]).field((*l.va)[1]);
        } else {
            w.empty().empty();
        }
        if (l.expression) w.field(std::int64_t{*l.expression});
        else w.empty();
        for (auto a : l.aus) {
            if (a == kAuMissing) w.empty();
            else w.field(std::int64_t{a});
        }
        w.end_row();
    }
    w.close();
}

std::vector<std::string> prediction_header() {
    std::vector<std::string> h{"video_id", "frame", "valence", "arousal"};
    for (const char* name : kExpressionNames) h.push_back(std::string("p_") + name);
    for (std::size_t i = 0; i < kNumAu; ++i) h.push_back(au_column(i));
    return h;
}

PredictionTable load_predictions(const std::filesystem::path& path) {
    CsvReader reader(path);
    const auto header = prediction_header();
    reader.expect_header(header);

    struct Row {
        FrameKey key;
        PredictionSet p;
    };
    std::vector<Row> rows;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        Row r{{std::string(f[0]), parse_int(f[1], line, "frame")}, {}};
        std::size_t c = 2;
        for (auto& v : r.p.va) { v = parse_double(f[c], line, header[c]); ++c; }
        for (auto& v : r.p.expr) { v = parse_double(f[c], line, header[c]); ++c; }
        for (auto& v : r.p.au) { v = parse_double(f[c], line, header[c]); ++c; }
        try {
            validate_prediction(r.p);
        } catch (const Error& e) {
            fail(ErrorKind::Validation, path.string() + ": line " + std::to_string(line) + ": " + e.what());
        }
        rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });

    PredictionTable out;
    for (auto& r : rows) {
        if (out.empty() || out.back().video_id != r.key.video_id) {
            out.push_back(PredictionTrack{r.key.video_id, {}, {}});
        } else if (out.back().frames.back() == r.key.frame) {
            fail(ErrorKind::Validation, path.string() + ": duplicate frame (" + r.key.video_id + ", " +
                                            std::to_string(r.key.frame) + ")");
        }
        out.back().frames.push_back(r.key.frame);
        out.back().values.push_back(r.p);
    }
    return out;
}

void write_predictions(const std::filesystem::path& path, const PredictionTable& table) {
    CsvWriter w(path, prediction_header());
    for (const auto& track : table) {
        for (std::size_t i = 0; i < track.frames.size(); ++i) {
            const auto& p = track.values[i];
            w.field(track.video_id).field(track.frames[i]);
            for (double v : p.va) w.field(v);
            for (double v : p.expr) w.field(v);
            for (double v : p.au) w.field(v);
            w.end_row();
        }
    }
    w.close();
}

TaskIndex align(const FeatureSet& features, const LabelMap& labels) {
    TaskIndex idx;
    std::size_t matched = 0;
    for (const auto& track : features.tracks) {
        for (const auto& r : track.frames) {
            FrameKey key{r.video_id, r.frame};
            auto it = labels.find(key);
            if (it == labels.end()) {
                ++idx.unlabeled_frames;
                continue;
            }
            ++matched;
            const auto& l = it->second;
            if (l.va) idx.va.push_back(key);
            if (l.expression) idx.expr.push_back(key);
            if (l.has_any_au()) idx.au.push_back(key);
        }
    }
    idx.labels_without_features = labels.size() - matched;
    return idx;
}

const PredictionSet* find_prediction(const PredictionTable& table, const FrameKey& key) {
    auto t = std::lower_bound(table.begin(), table.end(), key.video_id,
                              [](const PredictionTrack& tr, const std::string& id) { return tr.video_id < id; });
    if (t == table.end() || t->video_id != key.video_id) {
        // hand-built tables need not be sorted by video
        t = std::find_if(table.begin(), table.end(), [&](const PredictionTrack& tr) { return tr.video_id == key.video_id; });
        if (t == table.end()) return nullptr;
    }
    auto f = std::lower_bound(t->frames.begin(), t->frames.end(), key.frame);
    if (f == t->frames.end() || *f != key.frame) return nullptr;
    return &t->values[static_cast<std::size_t>(f - t->frames.begin())];
}

bool same_keys(const PredictionTable& a, const PredictionTable& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].video_id != b[i].video_id || a[i].frames != b[i].frames) return false;
    return true;
}

}  // namespace affpipe
