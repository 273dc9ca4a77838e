#pragma once

// Core per-frame types and the CSV formats for features, labels and
// predictions. All containers are ordered lexicographically by video_id,
// then by frame index.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace affpipe {

inline constexpr std::size_t kNumExpr = 8;
inline constexpr std::size_t kNumAu = 12;
inline constexpr std::size_t kNumScores = kNumExpr + 2;

// Expression class order shared by logits, labels and probabilities.
enum class Expression : int {
    Neutral = 0, Anger, Disgust, Fear, Happiness, Sadness, Surprise, Other
};

inline constexpr std::array<const char*, kNumExpr> kExpressionNames = {
    "neutral", "anger", "disgust", "fear", "happiness", "sadness", "surprise", "other"};

// FACS ids of the twelve detected action units, in column order.
inline constexpr std::array<int, kNumAu> kAuIds = {1, 2, 4, 6, 7, 10, 12, 15, 23, 24, 25, 26};

using FrameIndex = std::int64_t;

struct FrameKey {
    std::string video_id;
    FrameIndex frame = 0;

    auto operator<=>(const FrameKey&) const = default;
    bool operator==(const FrameKey&) const = default;
};

struct FrameRecord {
    std::string video_id;
    FrameIndex frame = 0;
    std::vector<double> embedding;
    // 8 emotion logits (Expression order), raw valence, raw arousal.
    std::array<double, kNumScores> scores{};

    double raw_valence() const { return scores[kNumExpr]; }
    double raw_arousal() const { return scores[kNumExpr + 1]; }
};

struct VideoTrack {
    std::string video_id;
    std::vector<FrameRecord> frames;  // strictly increasing frame index
};

struct FeatureSet {
    std::size_t dim = 0;  // embedding width D
    std::vector<VideoTrack> tracks;

    std::size_t frame_count() const;
};

// AU label cell: 0, 1 or missing.
inline constexpr std::int8_t kAuMissing = -1;
using AuLabels = std::array<std::int8_t, kNumAu>;

struct MtlLabels {
    std::optional<std::array<double, 2>> va;  // valence, arousal
    std::optional<int> expression;
    AuLabels aus = filled_missing();

    bool has_any_au() const;
    bool empty() const { return !va && !expression && !has_any_au(); }

    static constexpr AuLabels filled_missing() {
        AuLabels a{};
        a.fill(kAuMissing);
        return a;
    }
};

using LabelMap = std::map<FrameKey, MtlLabels>;

struct PredictionSet {
    std::array<double, 2> va{};
    std::array<double, kNumExpr> expr{};
    std::array<double, kNumAu> au{};

    bool operator==(const PredictionSet&) const = default;
};

struct PredictionTrack {
    std::string video_id;
    std::vector<FrameIndex> frames;
    std::vector<PredictionSet> values;  // parallel to frames
};

using PredictionTable = std::vector<PredictionTrack>;

// Throws Validation if a PredictionSet leaves its codomain.
void validate_prediction(const PredictionSet& p, double simplex_tolerance = 1e-6);

// Feature CSV: video_id,frame,emb_0..emb_{D-1},logit_*(8),valence_raw,arousal_raw.
FeatureSet load_features(const std::filesystem::path& path,
                         std::optional<std::size_t> expected_dim = std::nullopt);
void write_features(const std::filesystem::path& path, const FeatureSet& features);
std::vector<std::string> feature_header(std::size_t dim);

// Labels CSV: video_id,frame,valence,arousal,expression,au1..au26. Empty = missing.
LabelMap load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelMap& labels);

// Predictions CSV: video_id,frame,valence,arousal,p_neutral..p_other,au1..au26.
PredictionTable load_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const PredictionTable& table);
std::vector<std::string> prediction_header();

// Groups flat rows into sorted tracks. Duplicate keys are a Validation error.
FeatureSet group_features(std::size_t dim, std::vector<FrameRecord> rows);

struct TaskIndex {
    std::vector<FrameKey> va;
    std::vector<FrameKey> expr;
    std::vector<FrameKey> au;
    std::size_t unlabeled_frames = 0;      // features present, no labels
    std::size_t labels_without_features = 0;
};

TaskIndex align(const FeatureSet& features, const LabelMap& labels);

// Lookup helper for prediction tables (binary search per track).
const PredictionSet* find_prediction(const PredictionTable& table, const FrameKey& key);

// Checks that two tables cover exactly the same (video_id, frame) keys.
bool same_keys(const PredictionTable& a, const PredictionTable& b);

}  // namespace affpipe
