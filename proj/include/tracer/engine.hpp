#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracer/backend.hpp"
#include "tracer/cache.hpp"
#include "tracer/particles.hpp"
#include "tracer/tokens.hpp"
#include "tracer/trajectory.hpp"

namespace tracer {

struct EngineConfig {
    int n_particles = 4;
    double ess_threshold = 2.0;
    double rejuvenation_threshold = 0.25;
    bool ablation_no_perception = false;
    bool ablation_uniform_weights = false;
    bool variant_self_correction = false;
    std::uint64_t seed = 0;
    LabelMode label_mode = LabelMode::ModelBased;
    int max_output = 1024;

    void validate() const;  // throws std::invalid_argument
    std::string canonical() const;
};

/// Six-way action-likelihood judgment mapped to a numeric score.
struct LikelihoodOption {
    char letter = 'c';
    double score = 0.60;
};

double likelihood_score(char letter);

/// Extracts the option letter after the last "Answer:" marker, tolerating
/// parentheses, case, and surrounding punctuation.
LikelihoodOption parse_likelihood_option(const std::string& response);

/// Items of a numbered list ("1. ...", "2) ..."); continuation lines join
/// the current item, a blank line ends it, prose between items is dropped.
std::vector<std::string> parse_numbered_list(const std::string& text);

struct StepSummary {
    int step = 1;
    std::string text;
};

struct StepTrace {
    int step = 1;
    double ess = 0.0;  // value checked against the resampling threshold
    bool weight_updated = false;
    bool resampled = false;
    bool rejuvenated = false;
    double mean_similarity = 0.0;
    std::vector<Hypothesis> hypotheses;  // snapshot after resampling/rejuvenation
    std::string summary;
    long calls = 0;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct TraceDocument {
    std::string agent;
    std::vector<std::string> blocks;
    std::string rendered;
    std::vector<StepTrace> steps;
    TokenAggregate tokens;
};

/// Tagged per-step rendering of the trajectory with its summaries.
TraceDocument render_trace(const Trajectory& trajectory,
                           const std::vector<StepSummary>& summaries);

nlohmann::ordered_json trace_to_json(const TraceDocument& doc);
TraceDocument trace_from_json(const nlohmann::json& doc);

class Engine {
public:
    Engine(EngineConfig config, Backend& backend, ResponseCache* cache = nullptr);

    /// Full pipeline: preprocess, per-step filtering, summarization, render.
    TraceDocument trace(const std::string& context, const std::string& agent);

    // Individual phases, exposed for targeted tests.
    ParticleSet initialize_hypotheses(const Trajectory& trajectory);
    ParticleSet propagate(const ParticleSet& prev, const Trajectory& trajectory, int step);
    ParticleSet update_weights(ParticleSet set, const Trajectory& trajectory, int step);
    ParticleSet rejuvenate(ParticleSet set);
    std::vector<StepSummary> summarize_hypotheses(const Trajectory& trajectory,
                                                  const std::vector<ParticleSet>& sets);

    const EngineConfig& config() const { return config_; }
    UsageLedger& ledger() { return ledger_; }

private:
    ModelResponse call(Phase phase, TemplateId template_id, Bindings bindings);
    StepSummary summarize_step(const Trajectory& trajectory, const ParticleSet& set, int step);

    EngineConfig config_;
    Backend& backend_;
    ResponseCache* cache_;
    UsageLedger ledger_;
    std::mt19937_64 rng_;
};

}  // namespace tracer
