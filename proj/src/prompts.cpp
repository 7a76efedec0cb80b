#include "tracer/prompts.hpp"

#include <array>
#include <stdexcept>

#include "tracer/errors.hpp"

namespace tracer {

namespace {

const std::string kPerceptionInference =
    R"(You are an expert perception tracker tasked with determining whether {target agent} perceived the target context. Briefly describe what {target agent} saw or why {target agent} could not see the target context. Make your response concise.

{context history}

<target context>{current context}</target context>)";

const std::string kInitialization =
    R"({context}

Generate a numbered list of {n} hypotheses what were {target agent}'s thoughts (e.g., beliefs, intent) that led to the action above. Do not add any additional comments.)";

const std::string kInitializationStrict =
    kInitialization +
    "\n\nRespond with exactly {n} numbered items, one per line, and nothing else.";

const std::string kPropagation =
    R"(You are an expert assistant trying to predict {target agent}'s thoughts.

<previous context>
{context}
</previous context>
<previous prediction regarding {target agent}'s thoughts>
{hypothesis}
</previous prediction regarding {target agent}'s thoughts>

<current context>
{new context}
</current context>

What did {target agent} believe?)";

const std::string kPropagationSelfCorrection =
    R"(You are an expert assistant trying to predict {target agent}'s thoughts.

<previous context>
{context}
</previous context>
<previous prediction regarding {target agent}'s thoughts>
{hypothesis}
</previous prediction regarding {target agent}'s thoughts>

<current context>
{new context}
</current context>

First, critique the previous prediction regarding {target agent}'s thoughts and revise it if it no longer holds. Then state the new prediction. What did {target agent} believe?)";

const std::string kWeightUpdate =
    R"(Your job is to evaluate the probability of actions/utterance under a given fact. Use common sense: for instance, if someone is searching for an item, they are likely to take it once they find it rather than merely observing it. If they don't take it and just sees it, it indicates a lack of interest and that was not what they were looking for. Briefly explain the probability of the action/utterance under the given fact first and then give the answer option with prefix 'Answer:'

{context}
<{target agent}'s thoughts>
{hypothesis}
</{target agent}'s thoughts>
<next action>{action}</next action>
<note>{perception}</note>

Question: Based on the context and {target agent}'s thoughts provided, would {target agent} do the next actions or say the next utterances described above? Let's think step by step and give the final answer.
(a) Very Likely (Around 90%)
(b) Likely (Around 70%)
(c) Somewhat Likely (Around 60%)
(d) Somewhat Unlikely (Around 25%)
(e) Unlikely (Around 20%)
(f) Very Unlikely (Below 10%))";

const std::string kRejuvenation =
    R"(Your task is to paraphrase the following text. Make sure to keep the meaning of the text intact while rephrasing them. Do not add any additional comments.

{hypothesis})";

const std::string kSummarization =
    R"({context}

<{target agent}'s thoughts>
{predictions}
</{target agent}'s thoughts>

Question: What did {target agent} believe?)";

const std::string kActionLabeling =
    R"(You are labeling the sentences of a story one at a time. Decide whether the sentence below includes an action (e.g., physical movements or utterances) performed by {target agent}. If it does, respond with Action. If it does not, respond with State.

<sentence>{sentence}</sentence>{format reminder})";

const std::string kQaDirect =
    R"({context}

Question: {question}

{answer instruction})";

const std::string kQaCot =
    R"({context}

Question: {question}

Let's think step by step and give the final answer.
{answer instruction})";

struct TemplateInfo {
    TemplateId id;
    const char* name;
    const std::string* body;
};

const std::array<TemplateInfo, 11> kTemplates{{
    {TemplateId::PerceptionInference, "perception_inference", &kPerceptionInference},
    {TemplateId::Initialization, "initialization", &kInitialization},
    {TemplateId::InitializationStrict, "initialization_strict", &kInitializationStrict},
    {TemplateId::Propagation, "propagation", &kPropagation},
    {TemplateId::PropagationSelfCorrection, "propagation_self_correction",
     &kPropagationSelfCorrection},
    {TemplateId::WeightUpdate, "weight_update", &kWeightUpdate},
    {TemplateId::Rejuvenation, "rejuvenation", &kRejuvenation},
    {TemplateId::Summarization, "summarization", &kSummarization},
    {TemplateId::ActionLabeling, "action_labeling", &kActionLabeling},
    {TemplateId::QaDirect, "qa_direct", &kQaDirect},
    {TemplateId::QaCot, "qa_cot", &kQaCot},
}};

const TemplateInfo& info_for(TemplateId id) {
    for (const auto& info : kTemplates) {
        if (info.id == id) return info;
    }
    throw std::invalid_argument("unknown template id");
}

}  // namespace

const std::string& template_body(TemplateId id) { return *info_for(id).body; }

std::string template_name(TemplateId id) { return info_for(id).name; }

TemplateId template_from_name(std::string_view name) {
    for (const auto& info : kTemplates) {
        if (name == info.name) return info.id;
    }
    throw std::invalid_argument("unknown template name: " + std::string(name));
}

std::string render_prompt(TemplateId id, const Bindings& bindings) {
    const std::string& body = template_body(id);
    std::string out;
    out.reserve(body.size());
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto open = body.find('{', pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        out.append(body, pos, open - pos);
        auto close = body.find('}', open + 1);
        if (close == std::string::npos) {
            throw std::logic_error("unterminated placeholder in template " + template_name(id));
        }
        std::string placeholder = body.substr(open + 1, close - open - 1);
        auto it = bindings.find(placeholder);
        if (it == bindings.end()) {
            throw MissingBindingError(placeholder);
        }
        out.append(it->second);
        pos = close + 1;
    }
    return out;
}

}  // namespace tracer
