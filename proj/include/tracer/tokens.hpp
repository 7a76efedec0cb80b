#pragma once

#include <map>
#include <string>
#include <vector>

#include "tracer/backend.hpp"

namespace tracer {

enum class Phase { Label, Perception, Init, Propagate, Weight, Rejuvenate, Summarize, Qa };

std::string phase_name(Phase phase);

struct PhaseTotals {
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long calls = 0;
    long cached_calls = 0;
    bool approximate = false;  // any contributing count was estimated
};

struct TokenAggregate {
    long prompt_total = 0;
    long completion_total = 0;
    std::map<Phase, PhaseTotals> per_phase;

    long total_calls() const;
};

struct PhasedResponse {
    Phase phase;
    ModelResponse response;
};

/// Sums provider-reported token counts per phase. Only phases that made
/// calls appear in the per-phase map.
TokenAggregate count_tokens(const std::vector<PhasedResponse>& responses);

/// Per-trace call log. Single logical writer; the engine issues its calls
/// sequentially between particle-set phases.
class UsageLedger {
public:
    void record(Phase phase, const ModelResponse& response);
    TokenAggregate aggregate() const { return count_tokens(entries_); }
    const std::vector<PhasedResponse>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

private:
    std::vector<PhasedResponse> entries_;
};

}  // namespace tracer
