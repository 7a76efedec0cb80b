#pragma once

// Deterministic reply rules shared by the fixture generator and the tests
// that consume the committed scripts. Every reply is a pure function of the
// rendered prompt, so recording runs and replaying runs agree byte for byte.

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracer/backend.hpp"
#include "tracer/engine.hpp"
#include "tracer/errors.hpp"
#include "tracer/harness.hpp"
#include "tracer/text.hpp"

namespace tracer::testing {

inline const std::string kGoldenContext =
    "Anne: I put the key in the drawer.\n"
    "David: Where is the key?\n"
    "Anne: It is in the drawer.\n"
    "David: Thanks, I will get it.\n"
    "Anne: You are welcome.\n"
    "David: Found it.\n";
inline const std::string kGoldenAgent = "David";

inline const std::string kCallCountContext =
    "Anne: The chest sits by the window.\n"
    "David: I will open the chest.\n"
    "Anne: The lamp is on the desk.\n"
    "David: Now I check the desk.\n"
    "Anne: A box rests under the bed.\n"
    "David: Next I search the bed.\n"
    "Anne: The shelf holds many books.\n"
    "David: Finally I scan the shelf.\n";

inline EngineConfig fixture_engine_config() {
    EngineConfig config;
    config.seed = 7;
    config.label_mode = LabelMode::RuleBasedDialogue;
    return config;
}

inline std::string slice(const std::string& text, const std::string& after,
                         const std::string& before) {
    auto a = text.find(after);
    if (a == std::string::npos) return "";
    a += after.size();
    auto b = text.find(before, a);
    if (b == std::string::npos) return "";
    return text.substr(a, b - a);
}

inline std::string after_marker(const std::string& text, const std::string& marker) {
    auto a = text.find(marker);
    if (a == std::string::npos) return "";
    return text.substr(a + marker.size());
}

inline std::string one_line(std::string s) {
    for (auto& c : s) {
        if (c == '\n') c = ' ';
    }
    return s;
}

// Likelihood letters per (action, hypothesis keyword). Step 1 of the golden
// scenario spreads the options, step 2 concentrates on the leader, step 3
// collapses hard enough to force a resample. Unknown actions rate (b).
inline char fixture_weight_letter(const std::string& action, const std::string& hypothesis) {
    auto has = [&](const char* keyword) { return hypothesis.find(keyword) != std::string::npos; };
    if (action.find("Where is the key?") != std::string::npos) {
        if (has("rests")) return 'a';
        if (has("locate")) return 'b';
        if (has("unsure")) return 'e';
        return 'f';
    }
    if (action.find("Thanks, I will get it.") != std::string::npos) {
        return has("rests") ? 'a' : 'e';
    }
    if (action.find("Found it.") != std::string::npos) {
        return has("rests") ? 'a' : 'f';
    }
    return 'b';
}

/// (question text, scripted reply) pairs covering both evaluation fixtures.
inline const std::vector<std::pair<std::string, std::string>>& qa_replies() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"Where does Mia think the apple is?", "Answer: (a)"},
        {"Where does Leo think Mia will look for the apple?",
         "The belief carries over. Answer: (a)"},
        {"Does Leo know that Mia saw the move?", "Answer: no"},
        {"Where does Sam think the coin is?", "Answer: (a)"},
        {"Where does Ava think Sam will search for the coin?", "Answer: (b)"},
        {"Does Sam know that Ava watched him?", "Answer: (a)"},
        {"What is Noah's goal in the store?", "Answer: (b)"},
        {"What is Ivy's goal in the kitchen?", "It is hard to say."},
        {"When does the train depart?", "Answer: (a)"},
        {"Who was on the call before Sam arrived?", "Answer: Lee, Kim"},
        {"Which box weighs more?", "Answer: (b)"},
        {"Is the museum open on Mondays?", "Answer: Yes, definitely."},
        {"Where does David believe the key is kept?", "Answer: (a)"},
        {"What does David want from Anne during the chat?", "Answer: (a)"},
        {"Does David end up finding the key?", "Answer: yes"},
        {"Where does Anne believe the key is kept?", "Answer: (a)"},
        {"Does Anne answer David's question about the key?", "Answer: yes"},
        {"Which item does David inspect first in the room?", "Answer: (a)"},
        {"Which item does David inspect last in the room?", "Answer: (a)"},
        {"Does David search the bed at some point?", "Answer: yes"},
        {"Where is the lamp according to Anne?", "Answer: (a)"},
        {"Does David scan the shelf in the end?", "Answer: yes"},
    };
    return table;
}

inline std::string fixture_reply(TemplateId id, const std::string& prompt) {
    switch (id) {
        case TemplateId::PerceptionInference: {
            const std::string agent = slice(prompt, "whether ", " perceived the target context");
            const std::string target =
                one_line(slice(prompt, "<target context>", "</target context>"));
            return agent + " attended to this part: " + target;
        }
        case TemplateId::Initialization:
        case TemplateId::InitializationStrict: {
            const std::string agent = slice(prompt, "what were ", "'s thoughts (e.g.");
            return "1. " + agent + " believes the key item rests in its first hiding spot.\n" +
                   "2. " + agent + " wants to locate something quickly.\n" +
                   "3. " + agent + " is unsure and weighing several possibilities.\n" +
                   "4. " + agent + " thinks another person remembers important details.";
        }
        case TemplateId::Propagation:
        case TemplateId::PropagationSelfCorrection: {
            // Carry the previous hypothesis forward unchanged.
            return slice(prompt, "'s thoughts>\n", "\n</previous prediction");
        }
        case TemplateId::WeightUpdate: {
            const std::string action = slice(prompt, "<next action>", "</next action>");
            const std::string hypothesis = slice(prompt, "'s thoughts>\n", "\n</");
            const char letter = fixture_weight_letter(action, hypothesis);
            return std::string("The thoughts are consistent with the behavior. Answer: (") +
                   letter + ")";
        }
        case TemplateId::Rejuvenation: {
            return "Put differently: " +
                   after_marker(prompt, "Do not add any additional comments.\n\n");
        }
        case TemplateId::Summarization: {
            const auto marker = prompt.find("'s thoughts>\nPrediction 1 (Weight: ");
            if (marker == std::string::npos) {
                throw std::logic_error("summarization prompt without predictions block");
            }
            const auto open = prompt.rfind("\n<", marker);
            const std::string agent = prompt.substr(open + 2, marker - open - 2);
            const auto header_end = prompt.find('\n', prompt.find("Prediction 1 (Weight: "));
            auto body_end = prompt.find("\n\nPrediction 2", header_end);
            const std::string top = prompt.substr(header_end + 1, body_end - header_end - 1);
            return agent + " most likely believes this: " + one_line(top);
        }
        case TemplateId::QaDirect:
        case TemplateId::QaCot: {
            for (const auto& [question, reply] : qa_replies()) {
                if (prompt.find(question) != std::string::npos) return reply;
            }
            throw std::logic_error("no QA rule for prompt: " + prompt.substr(0, 120));
        }
        case TemplateId::ActionLabeling:
            throw std::logic_error("fixtures label actions with the dialogue rule");
    }
    throw std::logic_error("unhandled template id");
}

/// Backend that answers with fixture_reply and records every distinct
/// (prompt, reply) pair in first-seen order.
class RuleBackend : public Backend {
public:
    explicit RuleBackend(std::string id = "scripted:fixture") : id_(std::move(id)) {}

    std::string id() const override { return id_; }

    ModelResponse complete(const ModelRequest& request) override {
        const std::string prompt = rendered_prompt(request);
        const std::string reply = fixture_reply(request.template_id, prompt);
        if (seen_.emplace(prompt, entries_.size()).second) {
            ScriptEntry entry;
            entry.match = prompt;
            entry.reply = reply;
            entry.prompt_tokens = approx_token_count(prompt);
            entry.completion_tokens = approx_token_count(reply);
            entries_.push_back(std::move(entry));
        }
        ModelResponse response;
        response.text = reply;
        response.prompt_tokens = approx_token_count(prompt);
        response.completion_tokens = approx_token_count(reply);
        return response;
    }

    const std::vector<ScriptEntry>& entries() const { return entries_; }

private:
    std::string id_;
    std::map<std::string, std::size_t> seen_;
    std::vector<ScriptEntry> entries_;
};

struct FixtureItem {
    std::string id;
    std::string question_type;
    std::string group_id;
    std::string context;
    std::string target_agent;
    std::string question;
    std::string answer_mode;
    std::vector<std::string> options;
    nlohmann::json gold;
};

/// 12-item dataset with per-type accuracies {1.0, 0.5, 0.0, 0.5} under the
/// scripted QA replies; group g1 fully correct, group g2 not.
inline std::vector<FixtureItem> harness_items() {
    const std::string c1 =
        "Mia puts the apple in the basket. Leo moves the apple to the shelf while Mia is away.";
    const std::string c2 = "Sam hides the coin under the rug. Ava sees Sam hide the coin.";
    std::vector<FixtureItem> items;
    items.push_back({"q01", "belief_first", "g1", c1, "Mia",
                     "Where does Mia think the apple is?", "choice",
                     {"in the basket", "on the shelf"}, "in the basket"});
    items.push_back({"q02", "belief_second", "g1", c1, "Leo",
                     "Where does Leo think Mia will look for the apple?", "choice",
                     {"in the basket", "on the shelf"}, "in the basket"});
    items.push_back({"q03", "belief_second", "g1", c1, "Leo",
                     "Does Leo know that Mia saw the move?", "binary", {}, "no"});
    items.push_back({"q04", "belief_first", "g2", c2, "Sam",
                     "Where does Sam think the coin is?", "choice",
                     {"under the rug", "in the jar"}, "under the rug"});
    items.push_back({"q05", "belief_second", "g2", c2, "Ava",
                     "Where does Ava think Sam will search for the coin?", "choice",
                     {"under the rug", "in the jar"}, "under the rug"});
    items.push_back({"q06", "belief_second", "g2", c2, "Sam",
                     "Does Sam know that Ava watched him?", "choice", {"yes", "no"}, "no"});
    items.push_back({"q07", "goal", "", "Noah scans every shelf in the store.", "Noah",
                     "What is Noah's goal in the store?", "choice",
                     {"finding an item", "counting shelves"}, "finding an item"});
    items.push_back({"q08", "goal", "", "Ivy opens all the cupboards one by one.", "Ivy",
                     "What is Ivy's goal in the kitchen?", "choice",
                     {"searching for a cup", "cleaning"}, "searching for a cup"});
    items.push_back({"q09", "fact", "", "The train departs at nine from platform two.", "",
                     "When does the train depart?", "choice", {"at nine", "at ten"}, "at nine"});
    items.push_back({"q10", "fact", "", "Kim and Lee joined the call before Sam arrived.", "",
                     "Who was on the call before Sam arrived?", "set_match", {},
                     nlohmann::json::array({"Kim", "Lee"})});
    items.push_back({"q11", "fact", "", "The red box weighs more than the blue box.", "",
                     "Which box weighs more?", "choice", {"the red box", "the blue box"},
                     "the red box"});
    items.push_back({"q12", "fact", "", "The museum closes on Mondays.", "",
                     "Is the museum open on Mondays?", "binary", {}, "no"});
    return items;
}

/// Two contexts, five items each; agents split so the trace store computes
/// exactly three traces: (c1, David), (c1, Anne), (c2, David).
inline std::vector<FixtureItem> tracestore_items() {
    const std::string c1 = kGoldenContext;
    const std::string c2 = kCallCountContext;
    std::vector<FixtureItem> items;
    items.push_back({"s01", "probe", "", c1, "David",
                     "Where does David believe the key is kept?", "choice",
                     {"in the drawer", "on the table"}, "in the drawer"});
    items.push_back({"s02", "probe", "", c1, "David",
                     "What does David want from Anne during the chat?", "choice",
                     {"help finding the key", "nothing"}, "help finding the key"});
    items.push_back({"s03", "probe", "", c1, "David", "Does David end up finding the key?",
                     "binary", {}, "yes"});
    items.push_back({"s04", "probe", "", c1, "Anne",
                     "Where does Anne believe the key is kept?", "choice",
                     {"in the drawer", "on the table"}, "in the drawer"});
    items.push_back({"s05", "probe", "", c1, "Anne",
                     "Does Anne answer David's question about the key?", "binary", {}, "yes"});
    items.push_back({"s06", "probe", "", c2, "David",
                     "Which item does David inspect first in the room?", "choice",
                     {"the chest", "the shelf"}, "the chest"});
    items.push_back({"s07", "probe", "", c2, "David",
                     "Which item does David inspect last in the room?", "choice",
                     {"the shelf", "the bed"}, "the shelf"});
    items.push_back({"s08", "probe", "", c2, "David", "Does David search the bed at some point?",
                     "binary", {}, "yes"});
    items.push_back({"s09", "probe", "", c2, "David", "Where is the lamp according to Anne?",
                     "choice", {"on the desk", "under the bed"}, "on the desk"});
    items.push_back({"s10", "probe", "", c2, "David", "Does David scan the shelf in the end?",
                     "binary", {}, "yes"});
    return items;
}

inline void write_dataset(const std::filesystem::path& path,
                          const std::vector<FixtureItem>& items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StoreError("cannot write dataset: " + path.string());
    for (const auto& item : items) {
        nlohmann::ordered_json doc{
            {"id", item.id},
            {"context", item.context},
            {"question", item.question},
            {"answer_mode", item.answer_mode},
            {"gold", item.gold},
            {"question_type", item.question_type},
        };
        if (!item.target_agent.empty()) doc["target_agent"] = item.target_agent;
        if (!item.options.empty()) doc["options"] = item.options;
        if (!item.group_id.empty()) doc["group_id"] = item.group_id;
        out << doc.dump() << '\n';
    }
}

inline void write_script(const std::filesystem::path& path,
                         const std::vector<ScriptEntry>& entries) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& entry : entries) {
        doc.push_back(nlohmann::ordered_json{
            {"match", entry.match},
            {"reply", entry.reply},
            {"prompt_tokens", *entry.prompt_tokens},
            {"completion_tokens", *entry.completion_tokens},
        });
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StoreError("cannot write script: " + path.string());
    out << doc.dump(2) << '\n';
}

inline std::filesystem::path fixture_dir() { return TRACER_FIXTURE_DIR; }

inline std::vector<MetricFamily> harness_families() {
    return {MetricFamily{"belief", {"belief_first", "belief_second"}}};
}

}  // namespace tracer::testing
