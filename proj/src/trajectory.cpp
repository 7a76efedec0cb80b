#include "tracer/trajectory.hpp"

#include <cctype>

#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

std::vector<Segment> segment_context(std::string_view context) {
    if (trim(context).empty()) {
        throw EmptyContextError("context is blank");
    }
    auto sentences = split_sentences(context);
    if (sentences.empty()) {
        throw EmptyContextError("context contains no sentences");
    }
    std::vector<Segment> segments;
    segments.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        segments.push_back(Segment{static_cast<int>(i), std::move(sentences[i]),
                                   SegmentLabel::State});
    }
    return segments;
}

namespace {

// Finds the last standalone occurrence of "state" or "action" in a model
// reply; returns nullopt when neither appears.
std::optional<SegmentLabel> parse_label_reply(const std::string& reply) {
    const std::string lowered = to_lower(reply);
    auto last_word = [&](std::string_view word) -> std::ptrdiff_t {
        std::ptrdiff_t best = -1;
        std::size_t pos = 0;
        while ((pos = lowered.find(word, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(lowered[pos - 1]));
            std::size_t end = pos + word.size();
            bool right_ok =
                end >= lowered.size() || !std::isalnum(static_cast<unsigned char>(lowered[end]));
            if (left_ok && right_ok) best = static_cast<std::ptrdiff_t>(pos);
            ++pos;
        }
        return best;
    };
    const auto state_pos = last_word("state");
    const auto action_pos = last_word("action");
    if (state_pos < 0 && action_pos < 0) return std::nullopt;
    return action_pos > state_pos ? SegmentLabel::Action : SegmentLabel::State;
}

}  // namespace

std::vector<Segment> label_actions(std::vector<Segment> segments, const std::string& agent,
                                   LabelMode mode, Backend* backend, UsageLedger* ledger,
                                   ResponseCache* cache, int max_output) {
    if (segments.empty()) {
        throw std::invalid_argument("label_actions requires at least one segment");
    }
    if (mode == LabelMode::RuleBasedDialogue) {
        const std::string agent_lower = to_lower(agent);
        for (auto& segment : segments) {
            const std::string speaker = dialogue_speaker(segment.text);
            segment.label = (!speaker.empty() && to_lower(speaker) == agent_lower)
                                ? SegmentLabel::Action
                                : SegmentLabel::State;
        }
        return segments;
    }

    if (backend == nullptr) {
        throw std::invalid_argument("model-based labeling requires a backend");
    }
    for (auto& segment : segments) {
        std::optional<SegmentLabel> label;
        for (int attempt = 0; attempt < 2 && !label; ++attempt) {
            ModelRequest request;
            request.template_id = TemplateId::ActionLabeling;
            request.bindings = {
                {"target agent", agent},
                {"sentence", segment.text},
                {"format reminder",
                 attempt == 0 ? "" : "\n\nAnswer with exactly State or Action."},
            };
            request.max_output = max_output;
            ModelResponse response = backend_call(*backend, request, cache);
            if (ledger != nullptr) ledger->record(Phase::Label, response);
            label = parse_label_reply(response.text);
        }
        if (!label) {
            throw UnparseableLabelError("no recognizable label for segment " +
                                        std::to_string(segment.index) + ": \"" + segment.text +
                                        "\"");
        }
        segment.label = *label;
    }
    return segments;
}

Trajectory assemble_trajectory(const std::vector<Segment>& segments, const std::string& agent) {
    Trajectory trajectory;
    trajectory.agent = agent;
    std::string pending_state;
    auto append_state = [&](const std::string& text) {
        if (!pending_state.empty()) pending_state.push_back('\n');
        pending_state.append(text);
    };
    for (const auto& segment : segments) {
        if (segment.label == SegmentLabel::State) {
            append_state(segment.text);
        } else {
            StepRecord step;
            step.step = static_cast<int>(trajectory.steps.size()) + 1;
            step.state = std::move(pending_state);
            pending_state.clear();
            step.action = segment.text;
            trajectory.steps.push_back(std::move(step));
        }
    }
    if (!pending_state.empty()) {
        StepRecord step;
        step.step = static_cast<int>(trajectory.steps.size()) + 1;
        step.state = std::move(pending_state);
        trajectory.steps.push_back(std::move(step));
    }
    return trajectory;
}

std::string step_text(const StepRecord& step, bool include_note) {
    std::string out;
    auto append_line = [&](const std::string& text) {
        if (text.empty()) return;
        if (!out.empty()) out.push_back('\n');
        out.append(text);
    };
    append_line(step.state);
    append_line(step.action);
    if (include_note && step.perception.has_value()) {
        append_line("<note>" + *step.perception + "</note>");
    }
    return out;
}

std::string history_text(const Trajectory& trajectory, int upto, bool include_notes) {
    std::string out;
    for (const auto& step : trajectory.steps) {
        if (step.step > upto) break;
        const std::string text = step_text(step, include_notes);
        if (text.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out.append(text);
    }
    return out;
}

void infer_perceptions(Trajectory& trajectory, Backend& backend, UsageLedger* ledger,
                       ResponseCache* cache, int max_output) {
    for (auto& step : trajectory.steps) {
        ModelRequest request;
        request.template_id = TemplateId::PerceptionInference;
        request.bindings = {
            {"target agent", trajectory.agent},
            {"context history", history_text(trajectory, step.step - 1, true)},
            {"current context", step_text(step, false)},
        };
        request.max_output = max_output;
        ModelResponse response;
        try {
            response = backend_call(backend, request, cache);
        } catch (const BackendError& e) {
            throw BackendError(e.kind(), std::string(e.what()) + " (perception inference, step " +
                                             std::to_string(step.step) + ")");
        }
        if (ledger != nullptr) ledger->record(Phase::Perception, response);
        step.perception = response.text;
    }
}

}  // namespace tracer
