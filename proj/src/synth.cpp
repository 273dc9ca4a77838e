#include "affpipe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "affpipe/error.hpp"
#include "affpipe/random.hpp"

namespace affpipe {

namespace {

// Valence/arousal anchor per expression.
constexpr std::array<std::array<double, 2>, kNumExpr> kVaAnchor = {{
    {0.0, -0.1},   // neutral
    {-0.6, 0.6},   // anger
    {-0.6, 0.3},   // disgust
    {-0.5, 0.7},   // fear
    {0.7, 0.4},    // happiness
    {-0.6, -0.4},  // sadness
    {0.3, 0.8},    // surprise
    {0.1, 0.2},    // other
}};

// Activation probability of each AU (kAuIds order) per expression.
constexpr std::array<std::array<double, kNumAu>, kNumExpr> kAuRates = {{
    //  1     2     4     6     7    10    12    15    23    24    25    26
    {0.08, 0.08, 0.08, 0.08, 0.10, 0.08, 0.08, 0.05, 0.05, 0.05, 0.15, 0.08},
    {0.10, 0.08, 0.80, 0.10, 0.70, 0.20, 0.05, 0.10, 0.60, 0.50, 0.20, 0.10},
    {0.10, 0.05, 0.50, 0.20, 0.40, 0.80, 0.10, 0.40, 0.10, 0.10, 0.40, 0.10},
    {0.80, 0.60, 0.60, 0.05, 0.20, 0.10, 0.05, 0.20, 0.10, 0.05, 0.70, 0.50},
    {0.05, 0.05, 0.05, 0.90, 0.40, 0.30, 0.90, 0.02, 0.05, 0.05, 0.60, 0.20},
    {0.70, 0.10, 0.70, 0.10, 0.20, 0.10, 0.02, 0.80, 0.10, 0.20, 0.10, 0.05},
    {0.90, 0.90, 0.05, 0.05, 0.05, 0.05, 0.10, 0.05, 0.05, 0.05, 0.80, 0.80},
    {0.20, 0.20, 0.20, 0.20, 0.20, 0.20, 0.20, 0.20, 0.20, 0.20, 0.30, 0.20},
}};

constexpr std::size_t kLatentDim = kNumExpr + kNumAu + 2;

std::string video_name(const std::string& prefix, std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "_%04zu", i);
    return prefix + buf;
}

BasicProbabilities softmax(const std::array<double, kNumExpr>& z) {
    const double top = *std::max_element(z.begin(), z.end());
    BasicProbabilities p;
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumExpr; ++k) sum += p[k] = std::exp(z[k] - top);
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace

void SynthSpec::validate() const {
    require(tracks > 0 && length > 0, "synth: tracks and length must be positive");
    require(dim > 0, "synth: dim must be positive");
    require(noise >= 0.0 && embedding_noise >= 0.0, "synth: noise levels must be non-negative");
    require(logit_gain > 0.0, "synth: logit_gain must be positive");
    require(min_segment > 0 && min_segment <= max_segment, "synth: need 0 < min_segment <= max_segment");
    for (double p : {missing_va, missing_expr, missing_au, au_flip, extra_face, faceless})
        require(p >= 0.0 && p <= 1.0, "synth: probabilities must lie in [0, 1]");
    require(!prefix.empty(), "synth: empty video prefix");
}

SynthData synthesize(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    // The projection depends on the seed only, so train and validation sets
    // drawn with different prefixes share one embedding space.
    auto projection_rng = substream(seed, "synth/projection");
    auto rng = substream(seed, "synth/" + spec.prefix);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> seg_len(spec.min_segment, spec.max_segment);
    std::uniform_int_distribution<int> any_class(0, static_cast<int>(kNumExpr) - 1);
    const auto ref = reference_distribution();
    std::discrete_distribution<int> compound_prior(ref.begin(), ref.end());

    // Fixed latent -> embedding projection.
    std::vector<double> projection(spec.dim * kLatentDim);
    for (double& w : projection) w = gauss(projection_rng) / std::sqrt(3.0);

    SynthData out;
    out.features.dim = spec.dim;
    std::vector<FrameRecord> rows;
    rows.reserve(spec.tracks * spec.length);

    for (std::size_t t = 0; t < spec.tracks; ++t) {
        const std::string vid = video_name(spec.prefix, t);
        const double phase_v = unit(rng) * 6.283185307179586;
        const double phase_a = unit(rng) * 6.283185307179586;
        const double period = 80.0 + 120.0 * unit(rng);

        int expr = any_class(rng);
        std::size_t remaining = seg_len(rng);
        AuLabels au{};
        auto draw_aus = [&](int e) {
            for (std::size_t i = 0; i < kNumAu; ++i) au[i] = unit(rng) < kAuRates[e][i] ? 1 : 0;
        };
        draw_aus(expr);
        std::array<double, 2> drift = kVaAnchor[static_cast<std::size_t>(expr)];

        int compound = compound_prior(rng);
        std::size_t compound_remaining = seg_len(rng);
        std::vector<FaceFrame> face_frames;
        CompoundSequence truth{vid, {}, {}, 0, false};

        for (std::size_t i = 0; i < spec.length; ++i) {
            if (remaining == 0) {
                int next = any_class(rng);
                while (next == expr) next = any_class(rng);
                expr = next;
                remaining = seg_len(rng);
                draw_aus(expr);
            }
            --remaining;
            for (std::size_t k = 0; k < kNumAu; ++k)
                if (unit(rng) < spec.au_flip) au[k] = static_cast<std::int8_t>(1 - au[k]);

            // VA relaxes towards the anchor and oscillates slowly around it.
            const auto& anchor = kVaAnchor[static_cast<std::size_t>(expr)];
            for (std::size_t d = 0; d < 2; ++d) drift[d] += 0.08 * (anchor[d] - drift[d]);
            const double x = static_cast<double>(i);
            std::array<double, 2> va = {
                std::clamp(drift[0] + 0.25 * std::sin(6.283185307179586 * x / period + phase_v), -0.95, 0.95),
                std::clamp(drift[1] + 0.25 * std::sin(6.283185307179586 * x / (1.3 * period) + phase_a), -0.95, 0.95)};

            FrameRecord r;
            r.video_id = vid;
            r.frame = static_cast<FrameIndex>(i + 1);
            for (std::size_t k = 0; k < kNumExpr; ++k)
                r.scores[k] = (static_cast<int>(k) == expr ? spec.logit_gain : 0.0) + spec.noise * gauss(rng);
            for (std::size_t d = 0; d < 2; ++d)
                r.scores[kNumExpr + d] = std::clamp(va[d] + spec.noise * gauss(rng), -1.0, 1.0);

            std::array<double, kLatentDim> latent{};
            latent[static_cast<std::size_t>(expr)] = 1.5;
            for (std::size_t k = 0; k < kNumAu; ++k) latent[kNumExpr + k] = au[k] ? 1.0 : -1.0;
            latent[kNumExpr + kNumAu] = va[0];
            latent[kNumExpr + kNumAu + 1] = va[1];
            r.embedding.resize(spec.dim);
            for (std::size_t d = 0; d < spec.dim; ++d) {
                double acc = 0.0;
                for (std::size_t j = 0; j < kLatentDim; ++j) acc += projection[d * kLatentDim + j] * latent[j];
                r.embedding[d] = acc + spec.embedding_noise * gauss(rng);
            }

            MtlLabels labels;
            if (unit(rng) >= spec.missing_va) labels.va = va;
            if (unit(rng) >= spec.missing_expr) labels.expression = expr;
            if (unit(rng) >= spec.missing_au) labels.aus = au;
            if (!labels.empty()) out.labels.emplace(FrameKey{vid, r.frame}, labels);
            rows.push_back(std::move(r));

            // Faces with a planted compound class.
            if (compound_remaining == 0) {
                compound = compound_prior(rng);
                compound_remaining = seg_len(rng);
            }
            --compound_remaining;
            FaceFrame ff{vid, static_cast<FrameIndex>(i + 1), {}};
            if (unit(rng) >= spec.faceless) {
                auto planted_face = [&](int c, double area) {
                    std::array<double, kNumExpr> z{};
                    for (auto& v : z) v = spec.noise * gauss(rng);
                    const auto& pair = kCompoundPairs[static_cast<std::size_t>(c)];
                    z[static_cast<std::size_t>(pair.first)] += 1.5 * spec.logit_gain;
                    z[static_cast<std::size_t>(pair.second)] += 1.5 * spec.logit_gain;
                    return Face{area, softmax(z)};
                };
                ff.faces.push_back(planted_face(compound, 2000.0 + 3000.0 * unit(rng)));
                if (unit(rng) < spec.extra_face) {
                    const int other = compound_prior(rng);
                    ff.faces.push_back(planted_face(other, 200.0 + 1300.0 * unit(rng)));
                }
            }
            face_frames.push_back(std::move(ff));
            truth.frames.push_back(static_cast<FrameIndex>(i + 1));
            truth.labels.push_back(static_cast<CompoundClass>(compound));
        }
        out.faces.push_back(std::move(face_frames));
        out.compound_truth.push_back(std::move(truth));
    }
    out.features = group_features(spec.dim, std::move(rows));
    return out;
}

}  // namespace affpipe
