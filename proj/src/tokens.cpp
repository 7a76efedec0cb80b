#include "tracer/tokens.hpp"

#include <stdexcept>

namespace tracer {

std::string phase_name(Phase phase) {
    switch (phase) {
        case Phase::Label: return "label";
        case Phase::Perception: return "perception";
        case Phase::Init: return "init";
        case Phase::Propagate: return "propagate";
        case Phase::Weight: return "weight";
        case Phase::Rejuvenate: return "rejuvenate";
        case Phase::Summarize: return "summarize";
        case Phase::Qa: return "qa";
    }
    throw std::invalid_argument("unknown phase");
}

long TokenAggregate::total_calls() const {
    long calls = 0;
    for (const auto& [phase, totals] : per_phase) calls += totals.calls;
    return calls;
}

TokenAggregate count_tokens(const std::vector<PhasedResponse>& responses) {
    TokenAggregate aggregate;
    for (const auto& entry : responses) {
        auto& totals = aggregate.per_phase[entry.phase];
        totals.prompt_tokens += entry.response.prompt_tokens;
        totals.completion_tokens += entry.response.completion_tokens;
        totals.calls += 1;
        if (entry.response.cached) totals.cached_calls += 1;
        if (entry.response.approximate_tokens) totals.approximate = true;
        aggregate.prompt_total += entry.response.prompt_tokens;
        aggregate.completion_total += entry.response.completion_tokens;
    }
    return aggregate;
}

void UsageLedger::record(Phase phase, const ModelResponse& response) {
    entries_.push_back(PhasedResponse{phase, response});
}

}  // namespace tracer
