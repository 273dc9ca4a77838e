#pragma once

// Synthetic benchmark data with planted structure:
//   - expression labels are piecewise constant with segments of at least
//     `min_segment` frames;
//   - valence/arousal drift smoothly towards a per-expression anchor;
//   - AU states follow per-expression activation rates and persist within a
//     segment apart from occasional flips;
//   - backbone scores are the planted one-hot expression times `logit_gain`
//     plus Gaussian noise, and noisy raw valence/arousal;
//   - embeddings are a fixed random projection of the latent state plus noise;
//   - face files plant compound classes drawn from the reference distribution.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "affpipe/compound.hpp"
#include "affpipe/datamodel.hpp"

namespace affpipe {

struct SynthSpec {
    std::size_t tracks = 20;
    std::size_t length = 300;
    std::size_t dim = 32;
    double noise = 0.8;           // std of the score noise (logits and raw VA)
    double embedding_noise = 2.0;
    double logit_gain = 1.0;
    std::size_t min_segment = 30;
    std::size_t max_segment = 90;
    double missing_va = 0.05;     // per-frame probability that a label group is missing
    double missing_expr = 0.1;
    double missing_au = 0.05;
    double au_flip = 0.02;        // per-frame AU state flip probability
    double extra_face = 0.2;      // probability of a second, smaller face
    double faceless = 0.02;       // probability of a frame without faces
    std::string prefix = "video";

    void validate() const;
};

struct SynthData {
    FeatureSet features;
    LabelMap labels;
    std::vector<std::vector<FaceFrame>> faces;
    std::vector<CompoundSequence> compound_truth;
};

SynthData synthesize(const SynthSpec& spec, std::uint64_t seed);

}  // namespace affpipe
