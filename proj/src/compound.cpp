#include "affpipe/compound.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "affpipe/error.hpp"
#include "affpipe/metrics.hpp"
#include "affpipe/text_io.hpp"

namespace affpipe {

std::optional<CompoundClass> compound_from_name(std::string_view name) {
    for (std::size_t c = 0; c < kNumCompound; ++c)
        if (name == kCompoundNames[c]) return static_cast<CompoundClass>(c);
    return std::nullopt;
}

CompoundScores reference_distribution() {
    double total = 0.0;
    for (double c : kReferenceCounts) total += c;
    CompoundScores out;
    for (std::size_t c = 0; c < kNumCompound; ++c) out[c] = kReferenceCounts[c] / total;
    return out;
}

std::optional<MeanKind> mean_kind_from_name(std::string_view name) {
    if (name == "A" || name == "arithmetic") return MeanKind::Arithmetic;
    if (name == "G" || name == "geometric") return MeanKind::Geometric;
    if (name == "H" || name == "harmonic") return MeanKind::Harmonic;
    return std::nullopt;
}

std::optional<FacePolicy> face_policy_from_name(std::string_view name) {
    if (name == "average_all") return FacePolicy::AverageAll;
    if (name == "largest") return FacePolicy::Largest;
    return std::nullopt;
}

CompoundScores compound_scores(const BasicProbabilities& p, MeanKind kind) {
    CompoundScores out{};
    for (std::size_t c = 0; c < kNumCompound; ++c) {
        const double a = p[static_cast<std::size_t>(kCompoundPairs[c].first)];
        const double b = p[static_cast<std::size_t>(kCompoundPairs[c].second)];
        switch (kind) {
            case MeanKind::Arithmetic: out[c] = (a + b) / 2.0; break;
            case MeanKind::Geometric: out[c] = std::sqrt(a * b); break;
            case MeanKind::Harmonic: out[c] = a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; break;
        }
    }
    return out;
}

std::optional<CompoundScores> frame_aggregate(const FaceFrame& frame, MeanKind kind, FacePolicy policy) {
    if (frame.faces.empty()) return std::nullopt;
    if (policy == FacePolicy::Largest) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < frame.faces.size(); ++i)
            if (frame.faces[i].area > frame.faces[best].area) best = i;
        return compound_scores(frame.faces[best].probabilities, kind);
    }
    CompoundScores sum{};
    for (const auto& face : frame.faces) {
        const auto s = compound_scores(face.probabilities, kind);
        for (std::size_t c = 0; c < kNumCompound; ++c) sum[c] += s[c];
    }
    for (double& v : sum) v /= static_cast<double>(frame.faces.size());
    return sum;
}

CompoundSequence predict_sequence(std::span<const FaceFrame> frames, const CompoundOptions& options) {
    options.filter.validate();
    CompoundSequence out;
    if (!frames.empty()) out.video_id = frames.front().video_id;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        require(frames[i].video_id == out.video_id, "predict_sequence: frames from more than one video");
        if (i > 0) require(frames[i - 1].frame < frames[i].frame, "predict_sequence: frames must be strictly increasing");
    }

    // Smooth over frames that have faces only.
    std::vector<FrameIndex> present_frames;
    std::vector<CompoundScores> present_scores;
    for (const auto& f : frames) {
        if (auto s = frame_aggregate(f, options.mean, options.faces)) {
            present_frames.push_back(f.frame);
            present_scores.push_back(*s);
        }
    }
    if (present_frames.empty()) {
        out.all_faceless = true;
        return out;
    }
    ScoreSeries series(present_frames, kNumCompound);
    for (std::size_t i = 0; i < present_scores.size(); ++i)
        std::copy(present_scores[i].begin(), present_scores[i].end(), series.row(i).begin());
    const auto smoothed = smooth(series, options.filter);

    std::vector<CompoundClass> present_labels(smoothed.size());
    for (std::size_t i = 0; i < smoothed.size(); ++i)
        present_labels[i] = static_cast<CompoundClass>(argmax(smoothed.row(i)));

    out.frames.reserve(frames.size());
    out.labels.reserve(frames.size());
    std::size_t next = 0;  // first present frame with index >= current frame
    for (const auto& f : frames) {
        while (next < present_frames.size() && present_frames[next] < f.frame) ++next;
        std::size_t pick;
        if (next < present_frames.size() && present_frames[next] == f.frame) {
            pick = next;
        } else {
            ++out.backfilled;
            if (next == 0) pick = 0;
            else if (next == present_frames.size()) pick = next - 1;
            else pick = (f.frame - present_frames[next - 1] <= present_frames[next] - f.frame) ? next - 1 : next;
        }
        out.frames.push_back(f.frame);
        out.labels.push_back(present_labels[pick]);
    }
    return out;
}

ClassBalance class_balance_report(std::span<const CompoundClass> labels, const CompoundScores& reference) {
    require(!labels.empty(), "class_balance_report: no predicted labels");
    ClassBalance out;
    for (auto c : labels) ++out.histogram[static_cast<std::size_t>(c)];
    for (std::size_t c = 0; c < kNumCompound; ++c)
        out.predicted[c] = static_cast<double>(out.histogram[c]) / static_cast<double>(labels.size());
    const auto kl = kl_divergence(reference, out.predicted);
    out.kl = kl.value;
    out.floored = kl.degenerate;
    return out;
}

namespace {

std::vector<std::string> faces_header() {
    std::vector<std::string> h{"video_id", "frame", "face_area"};
    for (const char* name : kExpressionNames) h.push_back(std::string("p_") + name);
    return h;
}

}  // namespace

std::vector<std::vector<FaceFrame>> load_faces(const std::filesystem::path& path) {
    CsvReader reader(path);
    const auto header = faces_header();
    reader.expect_header(header);

    std::map<FrameKey, FaceFrame> frames;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        auto at = [&](const std::string& msg) {
            return path.string() + ": line " + std::to_string(line) + ": " + msg;
        };
        FrameKey key{std::string(f[0]), parse_int(f[1], line, "frame")};
        if (key.video_id.empty()) fail(ErrorKind::Parse, at("empty video_id"));
        auto& frame = frames[key];
        frame.video_id = key.video_id;
        frame.frame = key.frame;

        const bool faceless = std::all_of(f.begin() + 2, f.end(), [](std::string_view s) { return s.empty(); });
        if (faceless) continue;
        Face face;
        face.area = parse_double(f[2], line, "face_area");
        if (!(face.area > 0.0)) fail(ErrorKind::Validation, at("face_area must be positive"));
        double sum = 0.0;
        for (std::size_t k = 0; k < kNumExpr; ++k) {
            face.probabilities[k] = parse_double(f[3 + k], line, header[3 + k]);
            if (face.probabilities[k] < 0.0) fail(ErrorKind::Validation, at("negative probability"));
            sum += face.probabilities[k];
        }
        if (std::abs(sum - 1.0) > 1e-6)
            fail(ErrorKind::Validation, at("face probabilities sum to " + format_double(sum)));
        frame.faces.push_back(face);
    }

    std::vector<std::vector<FaceFrame>> videos;
    for (auto& [key, frame] : frames) {
        if (videos.empty() || videos.back().front().video_id != key.video_id) videos.emplace_back();
        videos.back().push_back(std::move(frame));
    }
    return videos;
}

void write_faces(const std::filesystem::path& path, const std::vector<std::vector<FaceFrame>>& videos) {
    CsvWriter w(path, faces_header());
    for (const auto& video : videos) {
        for (const auto& frame : video) {
            if (frame.faces.empty()) {
                w.field(frame.video_id).field(frame.frame);
                for (std::size_t i = 0; i < 1 + kNumExpr; ++i) w.empty();
                w.end_row();
                continue;
            }
            for (const auto& face : frame.faces) {
                w.field(frame.video_id).field(frame.frame).field(face.area);
                for (double p : face.probabilities) w.field(p);
                w.end_row();
            }
        }
    }
    w.close();
}

void write_compound_labels(const std::filesystem::path& path, const std::vector<CompoundSequence>& sequences) {
    const std::vector<std::string> header{"video_id", "frame", "compound_label"};
    CsvWriter w(path, header);
    for (const auto& seq : sequences)
        for (std::size_t i = 0; i < seq.frames.size(); ++i)
            w.field(seq.video_id).field(seq.frames[i]).field(kCompoundNames[static_cast<std::size_t>(seq.labels[i])]).end_row();
    w.close();
}

}  // namespace affpipe
