#include "tracer/particles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

namespace {

// 53-bit uniform double in [0, 1). Keeps resampling reproducible across
// platforms since the mt19937_64 stream is fully specified by the standard.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

ParticleSet normalize_weights(ParticleSet set) {
    double total = 0.0;
    for (const auto& h : set.hypotheses) {
        if (!(h.weight >= 0.0) || !std::isfinite(h.weight)) {
            throw std::invalid_argument("weights must be finite and non-negative");
        }
        total += h.weight;
    }
    if (total <= 0.0) {
        throw AllZeroWeightsError("cannot normalize: every weight is zero");
    }
    for (auto& h : set.hypotheses) h.weight /= total;
    set.normalized = true;
    return set;
}

double effective_sample_size(const ParticleSet& set) {
    if (!set.normalized) {
        throw NotNormalizedError("effective sample size requires a normalized set");
    }
    double sum_sq = 0.0;
    for (const auto& h : set.hypotheses) sum_sq += h.weight * h.weight;
    return 1.0 / sum_sq;
}

ParticleSet resample(const ParticleSet& set, std::mt19937_64& rng) {
    if (!set.normalized) {
        throw NotNormalizedError("resampling requires a normalized set");
    }
    const auto n = set.hypotheses.size();
    ParticleSet out;
    out.step = set.step;
    out.hypotheses.reserve(n);
    for (std::size_t draw = 0; draw < n; ++draw) {
        double u = uniform01(rng);
        double cumulative = 0.0;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            cumulative += set.hypotheses[i].weight;
            if (u < cumulative) {
                pick = i;
                break;
            }
        }
        Hypothesis h = set.hypotheses[pick];
        h.weight = 1.0 / static_cast<double>(n);
        out.hypotheses.push_back(std::move(h));
    }
    out.normalized = true;
    return out;
}

double jaccard(std::string_view a, std::string_view b) {
    const auto ta = word_tokens(a);
    const auto tb = word_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    std::size_t intersection = 0;
    for (const auto& token : ta) {
        if (tb.count(token) > 0) ++intersection;
    }
    const std::size_t unions = ta.size() + tb.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

SimilarityReport similarity_report(const ParticleSet& set) {
    const auto n = set.hypotheses.size();
    if (n < 2) {
        throw std::invalid_argument("similarity report requires at least two hypotheses");
    }
    SimilarityReport report;
    report.pair_values.reserve(n * (n - 1) / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double value = jaccard(set.hypotheses[i].text, set.hypotheses[j].text);
            report.pair_values.push_back(value);
            total += value;
        }
    }
    report.mean_pairwise = total / static_cast<double>(report.pair_values.size());
    return report;
}

bool needs_rejuvenation(const SimilarityReport& report, double threshold) {
    return report.mean_pairwise > threshold;
}

}  // namespace tracer
