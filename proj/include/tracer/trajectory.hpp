#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracer/backend.hpp"
#include "tracer/cache.hpp"
#include "tracer/tokens.hpp"

namespace tracer {

enum class SegmentLabel { State, Action };

struct Segment {
    int index = 0;
    std::string text;
    SegmentLabel label = SegmentLabel::State;
};

struct StepRecord {
    int step = 1;
    std::string state;   // empty when the step opens directly on an action
    std::string action;  // empty for a trailing state-only step
    std::optional<std::string> perception;
};

struct Trajectory {
    std::string agent;
    std::vector<StepRecord> steps;
    std::string source;
};

enum class LabelMode { ModelBased, RuleBasedDialogue };

/// Splits raw context into ordered sentence units. Throws EmptyContextError
/// on blank input.
std::vector<Segment> segment_context(std::string_view context);

/// Labels each segment Action iff it includes physical movements or
/// utterances by the target agent. RuleBasedDialogue labels "X: ..." lines
/// by speaker; ModelBased asks the backend per segment, retrying once with a
/// format reminder before failing with UnparseableLabelError.
std::vector<Segment> label_actions(std::vector<Segment> segments, const std::string& agent,
                                   LabelMode mode, Backend* backend,
                                   UsageLedger* ledger = nullptr, ResponseCache* cache = nullptr,
                                   int max_output = 16);

/// Groups labeled segments into steps: consecutive states attach to the next
/// action; trailing states form a final action-less step.
Trajectory assemble_trajectory(const std::vector<Segment>& segments, const std::string& agent);

/// One backend call per step, in order, storing the response as the step's
/// perception note. BackendError is rethrown with the failing step attached.
void infer_perceptions(Trajectory& trajectory, Backend& backend, UsageLedger* ledger = nullptr,
                       ResponseCache* cache = nullptr, int max_output = 1024);

/// Raw text of one step: state then action, newline-joined, with the
/// perception note appended when requested and present.
std::string step_text(const StepRecord& step, bool include_note);

/// Cumulative raw text of steps 1..upto (inclusive).
std::string history_text(const Trajectory& trajectory, int upto, bool include_notes);

}  // namespace tracer
