#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tracer {

/// One natural-language mental-state hypothesis with its weight.
struct Hypothesis {
    std::string text;
    double weight = 0.0;
    std::optional<int> lineage;  // parent index at the previous step; absent at t=1
};

struct ParticleSet {
    int step = 1;
    std::vector<Hypothesis> hypotheses;
    bool normalized = false;
};

struct SimilarityReport {
    double mean_pairwise = 0.0;
    std::vector<double> pair_values;  // all C(N,2) pairs, row-major order
};

/// Divides every weight by the total. Throws AllZeroWeightsError when the
/// total is zero so the caller can fall back to uniform weights.
ParticleSet normalize_weights(ParticleSet set);

/// 1 / sum(w_i^2) over normalized weights. Throws NotNormalizedError when the
/// set has not been normalized.
double effective_sample_size(const ParticleSet& set);

/// Draws N hypotheses with replacement proportional to the normalized
/// weights. Output weights are reset to uniform 1/N.
ParticleSet resample(const ParticleSet& set, std::mt19937_64& rng);

/// Jaccard similarity over lowercased word-token sets. Two empty token sets
/// compare as identical (1.0).
double jaccard(std::string_view a, std::string_view b);

SimilarityReport similarity_report(const ParticleSet& set);

/// True iff mean pairwise similarity strictly exceeds the threshold.
bool needs_rejuvenation(const SimilarityReport& report, double threshold);

}  // namespace tracer
