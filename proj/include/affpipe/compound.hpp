#pragma once

// Compound expressions from basic-emotion probabilities. Each of the seven
// compound classes pairs two basic emotions; its score is a mean (arithmetic,
// geometric or harmonic) of the two probabilities. Scores are aggregated over
// the faces in a frame, smoothed along the video and arg-maxed.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "affpipe/datamodel.hpp"
#include "affpipe/temporal_filters.hpp"

namespace affpipe {

inline constexpr std::size_t kNumCompound = 7;

enum class CompoundClass : int {
    FearfullySurprised = 0,
    HappilySurprised,
    SadlySurprised,
    DisgustedlySurprised,
    AngrilySurprised,
    SadlyFearful,
    SadlyAngry,
};

inline constexpr std::array<std::pair<Expression, Expression>, kNumCompound> kCompoundPairs = {{
    {Expression::Fear, Expression::Surprise},
    {Expression::Happiness, Expression::Surprise},
    {Expression::Sadness, Expression::Surprise},
    {Expression::Disgust, Expression::Surprise},
    {Expression::Anger, Expression::Surprise},
    {Expression::Sadness, Expression::Fear},
    {Expression::Sadness, Expression::Anger},
}};

inline constexpr std::array<const char*, kNumCompound> kCompoundNames = {
    "Fearfully_Surprised", "Happily_Surprised", "Sadly_Surprised", "Disgustedly_Surprised",
    "Angrily_Surprised",   "Sadly_Fearful",     "Sadly_Angry"};

// Frame counts per compound class in the reference video corpus.
inline constexpr std::array<double, kNumCompound> kReferenceCounts = {14445, 24915, 10780, 10637,
                                                                     10535, 10112, 8878};

std::optional<CompoundClass> compound_from_name(std::string_view name);

using CompoundScores = std::array<double, kNumCompound>;
using BasicProbabilities = std::array<double, kNumExpr>;

// Reference counts normalized to a probability vector.
CompoundScores reference_distribution();

enum class MeanKind { Arithmetic, Geometric, Harmonic };
enum class FacePolicy { AverageAll, Largest };

std::optional<MeanKind> mean_kind_from_name(std::string_view name);      // "A", "G", "H"
std::optional<FacePolicy> face_policy_from_name(std::string_view name);  // "average_all", "largest"

// Raw (not renormalized) pair means. H is 0 when both probabilities are 0.
CompoundScores compound_scores(const BasicProbabilities& p, MeanKind kind);

struct Face {
    double area = 0.0;
    BasicProbabilities probabilities{};
};

struct FaceFrame {
    std::string video_id;
    FrameIndex frame = 0;
    std::vector<Face> faces;
};

// nullopt for a frame without faces. Largest-face ties go to the first face.
std::optional<CompoundScores> frame_aggregate(const FaceFrame& frame, MeanKind kind, FacePolicy policy);

struct CompoundOptions {
    MeanKind mean = MeanKind::Arithmetic;
    FacePolicy faces = FacePolicy::Largest;
    FilterSpec filter;
};

struct CompoundSequence {
    std::string video_id;
    std::vector<FrameIndex> frames;
    std::vector<CompoundClass> labels;
    std::size_t backfilled = 0;  // faceless frames labeled from a neighbour
    bool all_faceless = false;   // nothing to label; frames/labels are empty
};

// Frames must belong to one video and be sorted by strictly increasing index.
// Faceless frames are skipped by the filter and take the label of the nearest
// frame with faces (the earlier one on ties).
CompoundSequence predict_sequence(std::span<const FaceFrame> frames, const CompoundOptions& options);

struct ClassBalance {
    std::array<std::size_t, kNumCompound> histogram{};
    CompoundScores predicted{};
    double kl = 0.0;
    bool floored = false;  // some class had no predictions
};

ClassBalance class_balance_report(std::span<const CompoundClass> labels,
                                  const CompoundScores& reference = reference_distribution());

// Faces CSV: video_id,frame,face_area,p_neutral..p_other. Several rows per
// frame are allowed; a row with every field after `frame` empty marks a frame
// without faces. Result is grouped per video, each sorted by frame.
std::vector<std::vector<FaceFrame>> load_faces(const std::filesystem::path& path);
void write_faces(const std::filesystem::path& path, const std::vector<std::vector<FaceFrame>>& videos);

// Output CSV: video_id,frame,compound_label.
void write_compound_labels(const std::filesystem::path& path, const std::vector<CompoundSequence>& sequences);

}  // namespace affpipe
