#include "tracer/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

namespace {

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string format_weight(double value) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

}  // namespace

void EngineConfig::validate() const {
    if (n_particles < 2) {
        throw std::invalid_argument("n_particles must be at least 2");
    }
    if (ess_threshold < 1.0 || ess_threshold > static_cast<double>(n_particles)) {
        throw std::invalid_argument("ess_threshold must lie in [1, n_particles]");
    }
    if (rejuvenation_threshold < 0.0 || rejuvenation_threshold > 1.0) {
        throw std::invalid_argument("rejuvenation_threshold must lie in [0, 1]");
    }
    if (max_output < 1) {
        throw std::invalid_argument("max_output must be positive");
    }
}

std::string EngineConfig::canonical() const {
    std::ostringstream out;
    out << "n_particles=" << n_particles << '\n'
        << "ess_threshold=" << format_double(ess_threshold) << '\n'
        << "rejuvenation_threshold=" << format_double(rejuvenation_threshold) << '\n'
        << "ablation_no_perception=" << (ablation_no_perception ? 1 : 0) << '\n'
        << "ablation_uniform_weights=" << (ablation_uniform_weights ? 1 : 0) << '\n'
        << "variant_self_correction=" << (variant_self_correction ? 1 : 0) << '\n'
        << "seed=" << seed << '\n'
        << "label_mode=" << (label_mode == LabelMode::ModelBased ? "model" : "rule_dialogue")
        << '\n'
        << "max_output=" << max_output << '\n';
    return out.str();
}

double likelihood_score(char letter) {
    switch (letter) {
        case 'a': return 0.90;
        case 'b': return 0.70;
        case 'c': return 0.60;
        case 'd': return 0.25;
        case 'e': return 0.20;
        case 'f': return 0.05;
        default: throw std::invalid_argument("likelihood option letter out of range");
    }
}

LikelihoodOption parse_likelihood_option(const std::string& response) {
    const std::string lowered = to_lower(response);
    static const std::string marker = "answer:";
    std::size_t last = std::string::npos;
    std::size_t pos = 0;
    while ((pos = lowered.find(marker, pos)) != std::string::npos) {
        last = pos;
        ++pos;
    }
    if (last == std::string::npos) {
        throw UnparseableAnswerError("no 'Answer:' marker in response");
    }
    for (std::size_t i = last + marker.size(); i < lowered.size(); ++i) {
        char c = lowered[i];
        if (c < 'a' || c > 'f') continue;
        bool left_ok = i == 0 || !is_alnum(lowered[i - 1]);
        bool right_ok = i + 1 >= lowered.size() || !is_alnum(lowered[i + 1]);
        if (left_ok && right_ok) {
            return LikelihoodOption{c, likelihood_score(c)};
        }
    }
    throw UnparseableAnswerError("no option letter after 'Answer:' marker");
}

std::vector<std::string> parse_numbered_list(const std::string& text) {
    std::vector<std::string> items;
    bool item_open = false;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        const std::string t = trim(line);
        if (t.empty()) {
            item_open = false;
            continue;
        }
        std::size_t digits = 0;
        while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) {
            ++digits;
        }
        if (digits > 0 && digits < t.size() && (t[digits] == '.' || t[digits] == ')')) {
            items.push_back(trim(t.substr(digits + 1)));
            item_open = true;
        } else if (item_open) {
            if (!items.back().empty()) items.back().push_back(' ');
            items.back().append(t);
        }
    }
    std::erase_if(items, [](const std::string& item) { return item.empty(); });
    return items;
}

TraceDocument render_trace(const Trajectory& trajectory,
                           const std::vector<StepSummary>& summaries) {
    if (summaries.size() != trajectory.steps.size()) {
        throw std::invalid_argument("summaries are not aligned to trajectory steps");
    }
    TraceDocument doc;
    doc.agent = trajectory.agent;
    for (const auto& step : trajectory.steps) {
        const auto& summary = summaries[static_cast<std::size_t>(step.step - 1)];
        std::string block = "<context " + std::to_string(step.step) + ">\n";
        if (!step.state.empty()) block += step.state + "\n";
        if (!step.action.empty()) block += step.action + "\n";
        if (step.perception.has_value()) {
            block += "<note>" + *step.perception + "</note>\n";
        }
        block += "\n<" + trajectory.agent + "'s updated thoughts>" + summary.text + "</" +
                 trajectory.agent + "'s updated thoughts>\n";
        block += "</context " + std::to_string(step.step) + ">";
        doc.blocks.push_back(std::move(block));
    }
    for (std::size_t i = 0; i < doc.blocks.size(); ++i) {
        if (i > 0) doc.rendered += "\n\n";
        doc.rendered += doc.blocks[i];
    }
    doc.rendered += "\n";
    return doc;
}

Engine::Engine(EngineConfig config, Backend& backend, ResponseCache* cache)
    : config_(config), backend_(backend), cache_(cache), rng_(config.seed) {
    config_.validate();
}

ModelResponse Engine::call(Phase phase, TemplateId template_id, Bindings bindings) {
    ModelRequest request;
    request.template_id = template_id;
    request.bindings = std::move(bindings);
    request.max_output = config_.max_output;
    ModelResponse response = backend_call(backend_, request, cache_);
    ledger_.record(phase, response);
    return response;
}

ParticleSet Engine::initialize_hypotheses(const Trajectory& trajectory) {
    if (trajectory.steps.empty()) {
        throw std::invalid_argument("cannot initialize from an empty trajectory");
    }
    const StepRecord& first = trajectory.steps.front();
    Bindings bindings{
        {"context", step_text(first, true)},
        {"n", std::to_string(config_.n_particles)},
        {"target agent", trajectory.agent},
    };
    auto items = parse_numbered_list(call(Phase::Init, TemplateId::Initialization, bindings).text);
    if (static_cast<int>(items.size()) < config_.n_particles) {
        items = parse_numbered_list(
            call(Phase::Init, TemplateId::InitializationStrict, bindings).text);
    }
    if (static_cast<int>(items.size()) < config_.n_particles) {
        throw MalformedListError("initialization returned " + std::to_string(items.size()) +
                                 " hypotheses, expected " + std::to_string(config_.n_particles));
    }
    ParticleSet set;
    set.step = 1;
    const double uniform = 1.0 / static_cast<double>(config_.n_particles);
    for (int i = 0; i < config_.n_particles; ++i) {
        set.hypotheses.push_back(Hypothesis{items[static_cast<std::size_t>(i)], uniform,
                                            std::nullopt});
    }
    set.normalized = true;
    return set;
}

ParticleSet Engine::propagate(const ParticleSet& prev, const Trajectory& trajectory, int step) {
    const StepRecord& record = trajectory.steps.at(static_cast<std::size_t>(step - 1));
    const TemplateId template_id = config_.variant_self_correction
                                       ? TemplateId::PropagationSelfCorrection
                                       : TemplateId::Propagation;
    ParticleSet next;
    next.step = step;
    next.normalized = prev.normalized;
    for (std::size_t i = 0; i < prev.hypotheses.size(); ++i) {
        Bindings bindings{
            {"target agent", trajectory.agent},
            {"context", history_text(trajectory, step - 1, true)},
            {"hypothesis", prev.hypotheses[i].text},
            {"new context", step_text(record, true)},
        };
        ModelResponse response;
        try {
            response = call(Phase::Propagate, template_id, std::move(bindings));
        } catch (const BackendError& e) {
            throw BackendError(e.kind(), std::string(e.what()) + " (propagation, step " +
                                             std::to_string(step) + ", particle " +
                                             std::to_string(i + 1) + ")");
        }
        next.hypotheses.push_back(
            Hypothesis{response.text, prev.hypotheses[i].weight, static_cast<int>(i)});
    }
    return next;
}

ParticleSet Engine::update_weights(ParticleSet set, const Trajectory& trajectory, int step) {
    const StepRecord& record = trajectory.steps.at(static_cast<std::size_t>(step - 1));
    if (record.action.empty()) {
        throw std::invalid_argument("weight update requires a step with an action");
    }
    std::string context = history_text(trajectory, step - 1, true);
    if (!record.state.empty()) {
        if (!context.empty()) context.push_back('\n');
        context.append(record.state);
    }
    for (std::size_t i = 0; i < set.hypotheses.size(); ++i) {
        Bindings bindings{
            {"context", context},
            {"target agent", trajectory.agent},
            {"hypothesis", set.hypotheses[i].text},
            {"action", record.action},
            {"perception", record.perception.value_or("")},
        };
        LikelihoodOption option;
        bool parsed = false;
        for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
            ModelResponse response;
            try {
                response = call(Phase::Weight, TemplateId::WeightUpdate, bindings);
            } catch (const BackendError& e) {
                throw BackendError(e.kind(), std::string(e.what()) + " (weight update, step " +
                                                 std::to_string(step) + ", particle " +
                                                 std::to_string(i + 1) + ")");
            }
            try {
                option = parse_likelihood_option(response.text);
                parsed = true;
            } catch (const UnparseableAnswerError&) {
                // retry once, then fall through to the neutral default
            }
        }
        set.hypotheses[i].weight = parsed ? option.score : likelihood_score('c');
    }
    set.normalized = false;
    return normalize_weights(std::move(set));
}

ParticleSet Engine::rejuvenate(ParticleSet set) {
    auto paraphrase = [&](const std::string& text, std::size_t particle) {
        Bindings bindings{{"hypothesis", text}};
        try {
            return call(Phase::Rejuvenate, TemplateId::Rejuvenation, std::move(bindings)).text;
        } catch (const BackendError& e) {
            throw BackendError(e.kind(), std::string(e.what()) + " (rejuvenation, particle " +
                                             std::to_string(particle + 1) + ")");
        }
    };

    std::set<std::string> seen;
    for (std::size_t i = 0; i < set.hypotheses.size(); ++i) {
        auto [it, inserted] = seen.insert(set.hypotheses[i].text);
        if (!inserted) {
            set.hypotheses[i].text = paraphrase(set.hypotheses[i].text, i);
        }
    }

    auto report = similarity_report(set);
    if (report.mean_pairwise > config_.rejuvenation_threshold) {
        std::size_t keep = 0;
        for (std::size_t i = 1; i < set.hypotheses.size(); ++i) {
            if (set.hypotheses[i].weight > set.hypotheses[keep].weight) keep = i;
        }
        for (std::size_t i = 0; i < set.hypotheses.size(); ++i) {
            if (i == keep) continue;
            set.hypotheses[i].text = paraphrase(set.hypotheses[i].text, i);
        }
    }
    return set;
}

StepSummary Engine::summarize_step(const Trajectory& trajectory, const ParticleSet& set,
                                   int step) {
    std::string predictions;
    for (std::size_t i = 0; i < set.hypotheses.size(); ++i) {
        if (i > 0) predictions += "\n\n";
        predictions += "Prediction " + std::to_string(i + 1) + " (Weight: " +
                       format_weight(set.hypotheses[i].weight) + ")\n" + set.hypotheses[i].text;
    }
    Bindings bindings{
        {"context", history_text(trajectory, step, true)},
        {"target agent", trajectory.agent},
        {"predictions", predictions},
    };
    ModelResponse response;
    try {
        response = call(Phase::Summarize, TemplateId::Summarization, std::move(bindings));
    } catch (const BackendError& e) {
        throw BackendError(e.kind(), std::string(e.what()) + " (summarization, step " +
                                         std::to_string(step) + ")");
    }
    return StepSummary{step, response.text};
}

std::vector<StepSummary> Engine::summarize_hypotheses(const Trajectory& trajectory,
                                                      const std::vector<ParticleSet>& sets) {
    std::vector<StepSummary> summaries;
    summaries.reserve(sets.size());
    for (const auto& set : sets) {
        summaries.push_back(summarize_step(trajectory, set, set.step));
    }
    return summaries;
}

TraceDocument Engine::trace(const std::string& context, const std::string& agent) {
    if (trim(agent).empty()) {
        throw std::invalid_argument("target agent name is empty");
    }
    ledger_.clear();
    rng_.seed(config_.seed);

    auto segments = segment_context(context);
    segments = label_actions(std::move(segments), agent, config_.label_mode, &backend_, &ledger_,
                             cache_, config_.max_output);
    Trajectory trajectory = assemble_trajectory(segments, agent);
    trajectory.source = context;
    if (!config_.ablation_no_perception) {
        infer_perceptions(trajectory, backend_, &ledger_, cache_, config_.max_output);
    }

    const int total_steps = static_cast<int>(trajectory.steps.size());
    const double uniform = 1.0 / static_cast<double>(config_.n_particles);
    std::vector<ParticleSet> sets;
    std::vector<StepTrace> stats;
    sets.reserve(static_cast<std::size_t>(total_steps));

    auto tokens_since = [&](std::size_t mark, StepTrace& st) {
        for (std::size_t k = mark; k < ledger_.entries().size(); ++k) {
            const auto& response = ledger_.entries()[k].response;
            st.calls += 1;
            st.prompt_tokens += response.prompt_tokens;
            st.completion_tokens += response.completion_tokens;
        }
    };

    for (int t = 1; t <= total_steps; ++t) {
        const std::size_t mark = ledger_.entries().size();
        ParticleSet current =
            (t == 1) ? initialize_hypotheses(trajectory) : propagate(sets.back(), trajectory, t);
        current.step = t;
        bool updated = false;
        if (config_.ablation_uniform_weights) {
            for (auto& h : current.hypotheses) h.weight = uniform;
            current.normalized = true;
        } else if (!trajectory.steps[static_cast<std::size_t>(t - 1)].action.empty()) {
            current = update_weights(std::move(current), trajectory, t);
            updated = true;
        }

        const double ess = effective_sample_size(current);
        const bool do_resample = ess < config_.ess_threshold;
        if (do_resample) {
            current = resample(current, rng_);
        }
        const auto report = similarity_report(current);
        const bool do_rejuvenate = needs_rejuvenation(report, config_.rejuvenation_threshold);
        if (do_rejuvenate) {
            current = rejuvenate(std::move(current));
        }

        StepTrace st;
        st.step = t;
        st.ess = ess;
        st.weight_updated = updated;
        st.resampled = do_resample;
        st.rejuvenated = do_rejuvenate;
        st.mean_similarity = report.mean_pairwise;
        st.hypotheses = current.hypotheses;
        tokens_since(mark, st);
        stats.push_back(std::move(st));
        sets.push_back(std::move(current));
    }

    std::vector<StepSummary> summaries;
    summaries.reserve(sets.size());
    for (int t = 1; t <= total_steps; ++t) {
        const std::size_t mark = ledger_.entries().size();
        StepSummary summary =
            summarize_step(trajectory, sets[static_cast<std::size_t>(t - 1)], t);
        auto& st = stats[static_cast<std::size_t>(t - 1)];
        tokens_since(mark, st);
        st.summary = summary.text;
        summaries.push_back(std::move(summary));
    }

    TraceDocument doc = render_trace(trajectory, summaries);
    doc.steps = std::move(stats);
    doc.tokens = ledger_.aggregate();
    return doc;
}

nlohmann::ordered_json trace_to_json(const TraceDocument& doc) {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const auto& st : doc.steps) {
        nlohmann::ordered_json hypotheses = nlohmann::ordered_json::array();
        for (const auto& h : st.hypotheses) {
            nlohmann::ordered_json entry{{"text", h.text}, {"weight", h.weight}};
            if (h.lineage.has_value()) {
                entry["lineage"] = *h.lineage;
            } else {
                entry["lineage"] = nullptr;
            }
            hypotheses.push_back(std::move(entry));
        }
        steps.push_back(nlohmann::ordered_json{
            {"step", st.step},
            {"ess", st.ess},
            {"weight_updated", st.weight_updated},
            {"resampled", st.resampled},
            {"rejuvenated", st.rejuvenated},
            {"mean_similarity", st.mean_similarity},
            {"summary", st.summary},
            {"calls", st.calls},
            {"prompt_tokens", st.prompt_tokens},
            {"completion_tokens", st.completion_tokens},
            {"hypotheses", std::move(hypotheses)},
        });
    }
    nlohmann::ordered_json per_phase = nlohmann::ordered_json::object();
    for (const auto& [phase, totals] : doc.tokens.per_phase) {
        per_phase[phase_name(phase)] = {
            {"prompt_tokens", totals.prompt_tokens},
            {"completion_tokens", totals.completion_tokens},
            {"calls", totals.calls},
            {"cached_calls", totals.cached_calls},
            {"approximate", totals.approximate},
        };
    }
    return nlohmann::ordered_json{
        {"agent", doc.agent},
        {"rendered", doc.rendered},
        {"blocks", doc.blocks},
        {"steps", std::move(steps)},
        {"tokens",
         {{"prompt_total", doc.tokens.prompt_total},
          {"completion_total", doc.tokens.completion_total},
          {"per_phase", std::move(per_phase)}}},
    };
}

TraceDocument trace_from_json(const nlohmann::json& doc) {
    TraceDocument out;
    out.agent = doc.at("agent").get<std::string>();
    out.rendered = doc.at("rendered").get<std::string>();
    out.blocks = doc.at("blocks").get<std::vector<std::string>>();
    for (const auto& st : doc.at("steps")) {
        StepTrace step;
        step.step = st.at("step").get<int>();
        step.ess = st.at("ess").get<double>();
        step.weight_updated = st.at("weight_updated").get<bool>();
        step.resampled = st.at("resampled").get<bool>();
        step.rejuvenated = st.at("rejuvenated").get<bool>();
        step.mean_similarity = st.at("mean_similarity").get<double>();
        step.summary = st.at("summary").get<std::string>();
        step.calls = st.at("calls").get<long>();
        step.prompt_tokens = st.at("prompt_tokens").get<long>();
        step.completion_tokens = st.at("completion_tokens").get<long>();
        for (const auto& h : st.at("hypotheses")) {
            Hypothesis hypothesis;
            hypothesis.text = h.at("text").get<std::string>();
            hypothesis.weight = h.at("weight").get<double>();
            if (!h.at("lineage").is_null()) hypothesis.lineage = h.at("lineage").get<int>();
            step.hypotheses.push_back(std::move(hypothesis));
        }
        out.steps.push_back(std::move(step));
    }
    const auto& tokens = doc.at("tokens");
    out.tokens.prompt_total = tokens.at("prompt_total").get<long>();
    out.tokens.completion_total = tokens.at("completion_total").get<long>();
    for (const auto& [name, totals] : tokens.at("per_phase").items()) {
        PhaseTotals pt;
        pt.prompt_tokens = totals.at("prompt_tokens").get<long>();
        pt.completion_tokens = totals.at("completion_tokens").get<long>();
        pt.calls = totals.at("calls").get<long>();
        pt.cached_calls = totals.at("cached_calls").get<long>();
        pt.approximate = totals.at("approximate").get<bool>();
        Phase phase;
        if (name == "label") phase = Phase::Label;
        else if (name == "perception") phase = Phase::Perception;
        else if (name == "init") phase = Phase::Init;
        else if (name == "propagate") phase = Phase::Propagate;
        else if (name == "weight") phase = Phase::Weight;
        else if (name == "rejuvenate") phase = Phase::Rejuvenate;
        else if (name == "summarize") phase = Phase::Summarize;
        else if (name == "qa") phase = Phase::Qa;
        else throw StoreError("unknown phase in stored trace: " + name);
        out.tokens.per_phase[phase] = pt;
    }
    return out;
}

}  // namespace tracer
