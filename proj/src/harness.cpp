#include "tracer/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "tracer/digest.hpp"
#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

std::string condition_name(Condition condition) {
    switch (condition) {
        case Condition::Baseline: return "baseline";
        case Condition::CoT: return "cot";
        case Condition::TT: return "tt";
        case Condition::TTCoT: return "ttcot";
    }
    throw std::invalid_argument("unknown condition");
}

Condition condition_from_name(const std::string& name) {
    const std::string lowered = to_lower(name);
    if (lowered == "baseline") return Condition::Baseline;
    if (lowered == "cot") return Condition::CoT;
    if (lowered == "tt") return Condition::TT;
    if (lowered == "ttcot" || lowered == "tt+cot") return Condition::TTCoT;
    throw std::invalid_argument("unknown condition: " + name);
}

std::string answer_mode_name(AnswerMode mode) {
    switch (mode) {
        case AnswerMode::Choice: return "choice";
        case AnswerMode::SetMatch: return "set_match";
        case AnswerMode::Binary: return "binary";
    }
    throw std::invalid_argument("unknown answer mode");
}

namespace {

AnswerMode answer_mode_from_name(const std::string& name) {
    const std::string lowered = to_lower(name);
    if (lowered == "choice") return AnswerMode::Choice;
    if (lowered == "set_match" || lowered == "setmatch") return AnswerMode::SetMatch;
    if (lowered == "binary") return AnswerMode::Binary;
    throw std::invalid_argument("unknown answer mode: " + name);
}

std::string normalize_name(std::string_view name) {
    std::string t = trim(name);
    while (!t.empty() && (t.back() == '.' || t.back() == '"' || t.back() == '\'')) t.pop_back();
    while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(t.begin());
    return to_lower(trim(t));
}

std::set<std::string> normalize_name_set(const std::vector<std::string>& names) {
    std::set<std::string> out;
    for (const auto& name : names) {
        std::string n = normalize_name(name);
        if (!n.empty()) out.insert(std::move(n));
    }
    return out;
}

char option_letter(std::size_t index) { return static_cast<char>('a' + index); }

}  // namespace

std::vector<EvalItem> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw StoreError("cannot open dataset: " + path.string());
    }
    std::vector<EvalItem> items;
    std::unordered_set<std::string> ids;
    std::unordered_map<std::string, std::string> group_contexts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(line_no, "(line)", std::string("invalid JSON: ") + e.what());
        }
        EvalItem item;
        try {
            item.id = doc.at("id").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw SchemaError(line_no, "id", "missing or not a string");
        }
        if (item.id.empty()) throw SchemaError(line_no, "id", "empty");
        if (!ids.insert(item.id).second) {
            throw SchemaError(line_no, "id", "duplicate id: " + item.id);
        }
        try {
            item.context = doc.at("context").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw SchemaError(line_no, "context", "missing or not a string");
        }
        if (trim(item.context).empty()) throw SchemaError(line_no, "context", "empty");
        try {
            item.question = doc.at("question").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw SchemaError(line_no, "question", "missing or not a string");
        }
        if (trim(item.question).empty()) throw SchemaError(line_no, "question", "empty");
        item.target_agent = doc.value("target_agent", "");
        item.question_type = doc.value("question_type", "");
        item.group_id = doc.value("group_id", "");

        std::string mode;
        try {
            mode = doc.at("answer_mode").get<std::string>();
            item.answer_mode = answer_mode_from_name(mode);
        } catch (const std::exception&) {
            throw SchemaError(line_no, "answer_mode", "expected choice, set_match, or binary");
        }

        switch (item.answer_mode) {
            case AnswerMode::Choice: {
                if (!doc.contains("options") || !doc["options"].is_array() ||
                    doc["options"].size() < 2) {
                    throw SchemaError(line_no, "options", "choice items need at least 2 options");
                }
                item.options = doc["options"].get<std::vector<std::string>>();
                std::string gold;
                try {
                    gold = doc.at("gold").get<std::string>();
                } catch (const nlohmann::json::exception&) {
                    throw SchemaError(line_no, "gold", "missing or not a string");
                }
                if (std::find(item.options.begin(), item.options.end(), gold) ==
                    item.options.end()) {
                    throw SchemaError(line_no, "gold", "gold answer is not among options");
                }
                item.gold = gold;
                break;
            }
            case AnswerMode::SetMatch: {
                if (!doc.contains("gold") || !doc["gold"].is_array() || doc["gold"].empty()) {
                    throw SchemaError(line_no, "gold", "set_match gold must be a non-empty array");
                }
                auto names = doc["gold"].get<std::vector<std::string>>();
                auto normalized = normalize_name_set(names);
                if (normalized.empty()) {
                    throw SchemaError(line_no, "gold", "set_match gold normalizes to empty");
                }
                item.gold = std::move(normalized);
                break;
            }
            case AnswerMode::Binary: {
                if (doc.contains("gold") && doc["gold"].is_boolean()) {
                    item.gold = doc["gold"].get<bool>();
                } else if (doc.contains("gold") && doc["gold"].is_string()) {
                    const std::string g = to_lower(doc["gold"].get<std::string>());
                    if (g != "yes" && g != "no") {
                        throw SchemaError(line_no, "gold", "binary gold must be yes or no");
                    }
                    item.gold = (g == "yes");
                } else {
                    throw SchemaError(line_no, "gold", "binary gold must be yes/no or boolean");
                }
                break;
            }
        }

        if (!item.group_id.empty()) {
            auto [it, inserted] = group_contexts.emplace(item.group_id, item.context);
            if (!inserted && it->second != item.context) {
                throw SchemaError(line_no, "group_id",
                                  "items in group '" + item.group_id +
                                      "' do not share a context");
            }
        }
        items.push_back(std::move(item));
    }
    return items;
}

ModelRequest qa_request(const EvalItem& item, const TraceDocument* trace, Condition condition,
                        int max_output) {
    std::string context = item.context;
    if (trace != nullptr) {
        context = trace->rendered + "\n\n" + item.context;
    }
    std::string question = item.question;
    if (item.answer_mode == AnswerMode::Choice) {
        for (std::size_t i = 0; i < item.options.size(); ++i) {
            question += "\n(";
            question += option_letter(i);
            question += ") " + item.options[i];
        }
    }
    std::string instruction;
    switch (item.answer_mode) {
        case AnswerMode::Choice:
            instruction =
                "Give the final answer with prefix 'Answer:' followed by the letter of the "
                "chosen option.";
            break;
        case AnswerMode::Binary:
            instruction = "Give the final answer with prefix 'Answer:' followed by yes or no.";
            break;
        case AnswerMode::SetMatch:
            instruction =
                "Give the final answer with prefix 'Answer:' followed by a comma-separated "
                "list of names.";
            break;
    }
    ModelRequest request;
    request.template_id = (condition == Condition::CoT || condition == Condition::TTCoT)
                              ? TemplateId::QaCot
                              : TemplateId::QaDirect;
    request.bindings = {
        {"context", context},
        {"question", question},
        {"answer instruction", instruction},
    };
    request.max_output = max_output;
    return request;
}

namespace {

// Offset just past the last "Answer:" marker, or npos.
std::size_t after_last_marker(const std::string& text) {
    const std::string lowered = to_lower(text);
    static const std::string marker = "answer:";
    std::size_t last = std::string::npos;
    std::size_t pos = 0;
    while ((pos = lowered.find(marker, pos)) != std::string::npos) {
        last = pos + marker.size();
        ++pos;
    }
    return last;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

AnswerPayload parse_answer(const EvalItem& item, const std::string& response) {
    const std::size_t start = after_last_marker(response);
    if (start == std::string::npos) {
        throw UnparseableAnswerError("no 'Answer:' marker in response");
    }
    const std::string lowered = to_lower(response);
    switch (item.answer_mode) {
        case AnswerMode::Choice: {
            const char max_letter = option_letter(item.options.size() - 1);
            for (std::size_t i = start; i < lowered.size(); ++i) {
                char c = lowered[i];
                if (c < 'a' || c > max_letter) continue;
                bool left_ok = i == 0 || !is_alnum(lowered[i - 1]);
                bool right_ok = i + 1 >= lowered.size() || !is_alnum(lowered[i + 1]);
                if (left_ok && right_ok) {
                    return item.options[static_cast<std::size_t>(c - 'a')];
                }
            }
            throw UnparseableAnswerError("no option letter after 'Answer:' marker");
        }
        case AnswerMode::Binary: {
            std::istringstream words(lowered.substr(start));
            std::string word;
            while (words >> word) {
                std::string w = normalize_name(word);
                while (!w.empty() && !is_alnum(w.front())) w.erase(w.begin());
                if (w == "yes") return true;
                if (w == "no") return false;
            }
            throw UnparseableAnswerError("no yes/no after 'Answer:' marker");
        }
        case AnswerMode::SetMatch: {
            std::string tail = response.substr(start);
            // " and " joins the final pair in natural list answers
            std::size_t pos;
            while ((pos = to_lower(tail).find(" and ")) != std::string::npos) {
                tail = tail.substr(0, pos) + "," + tail.substr(pos + 5);
            }
            std::set<std::string> names;
            std::string current;
            for (char c : tail) {
                if (c == ',' || c == ';' || c == '\n') {
                    std::string n = normalize_name(current);
                    if (!n.empty()) names.insert(std::move(n));
                    current.clear();
                } else {
                    current.push_back(c);
                }
            }
            std::string n = normalize_name(current);
            if (!n.empty()) names.insert(std::move(n));
            if (names.empty()) {
                throw UnparseableAnswerError("no names after 'Answer:' marker");
            }
            return names;
        }
    }
    throw UnparseableAnswerError("unhandled answer mode");
}

}  // namespace

Prediction answer_question(const EvalItem& item, const TraceDocument* trace, Condition condition,
                           Backend& backend, ResponseCache* cache, int max_output) {
    if ((condition == Condition::TT || condition == Condition::TTCoT) && trace == nullptr) {
        throw std::invalid_argument("TT conditions require a trace");
    }
    Prediction prediction;
    prediction.item_id = item.id;
    prediction.condition = condition;

    ModelRequest request = qa_request(item, trace, condition, max_output);
    ModelResponse response = backend_call(backend, request, cache);
    prediction.raw_response = response.text;
    prediction.prompt_tokens = response.prompt_tokens;
    prediction.completion_tokens = response.completion_tokens;

    try {
        prediction.parsed = parse_answer(item, response.text);
        prediction.parse_ok = true;
    } catch (const UnparseableAnswerError& e) {
        prediction.parse_ok = false;
        prediction.correct = false;
        prediction.error = e.what();
        return prediction;
    }
    prediction.correct = (prediction.parsed == item.gold);
    return prediction;
}

EvalReport aggregate(const std::vector<Prediction>& predictions,
                     const std::vector<EvalItem>& items,
                     const std::vector<MetricFamily>& families) {
    std::unordered_map<std::string, const EvalItem*> by_id;
    for (const auto& item : items) by_id[item.id] = &item;

    EvalReport report;
    std::unordered_map<std::string, std::vector<const Prediction*>> preds_by_item;
    for (const auto& prediction : predictions) {
        auto it = by_id.find(prediction.item_id);
        if (it == by_id.end()) {
            throw DanglingPredictionError("prediction references unknown item: " +
                                          prediction.item_id);
        }
        preds_by_item[prediction.item_id].push_back(&prediction);
        const EvalItem& item = *it->second;
        report.total += 1;
        auto& type_stats = report.per_type[item.question_type];
        type_stats.total += 1;
        if (prediction.correct) {
            report.correct += 1;
            type_stats.correct += 1;
            report.tokens_correct.count += 1;
            report.tokens_correct.prompt_tokens += prediction.prompt_tokens;
            report.tokens_correct.completion_tokens += prediction.completion_tokens;
        } else {
            report.tokens_incorrect.count += 1;
            report.tokens_incorrect.prompt_tokens += prediction.prompt_tokens;
            report.tokens_incorrect.completion_tokens += prediction.completion_tokens;
        }
    }
    report.overall = report.total == 0 ? 0.0
                                       : static_cast<double>(report.correct) /
                                             static_cast<double>(report.total);

    std::vector<MetricFamily> effective = families;
    if (effective.empty()) {
        effective.push_back(MetricFamily{"all", {}});
    }
    for (const auto& family : effective) {
        // group key -> (member item ids)
        std::map<std::string, std::vector<const EvalItem*>> groups;
        for (const auto& item : items) {
            if (!family.question_types.empty() &&
                family.question_types.count(item.question_type) == 0) {
                continue;
            }
            const std::string key =
                item.group_id.empty() ? "item:" + item.id : "group:" + item.group_id;
            groups[key].push_back(&item);
        }
        GroupRate rate;
        for (const auto& [key, members] : groups) {
            bool complete = true;
            bool all_correct = true;
            for (const EvalItem* member : members) {
                auto it = preds_by_item.find(member->id);
                if (it == preds_by_item.end() || it->second.empty()) {
                    complete = false;
                    break;
                }
                for (const Prediction* p : it->second) {
                    if (!p->correct) all_correct = false;
                }
            }
            if (!complete) continue;  // grouped rates only cover complete groups
            rate.groups += 1;
            if (all_correct) rate.correct += 1;
        }
        report.families[family.name] = rate;
    }

    // Report predictions in dataset order for stable output.
    for (const auto& item : items) {
        auto it = preds_by_item.find(item.id);
        if (it == preds_by_item.end()) continue;
        for (const Prediction* p : it->second) report.predictions.push_back(*p);
    }
    return report;
}

namespace {

nlohmann::ordered_json payload_to_json(const AnswerPayload& payload) {
    if (std::holds_alternative<std::string>(payload)) {
        return std::get<std::string>(payload);
    }
    if (std::holds_alternative<bool>(payload)) {
        return std::get<bool>(payload);
    }
    const auto& names = std::get<std::set<std::string>>(payload);
    return nlohmann::ordered_json(std::vector<std::string>(names.begin(), names.end()));
}

std::string format3(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    return buf;
}

}  // namespace

nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json per_type = nlohmann::ordered_json::object();
    for (const auto& [type, stats] : report.per_type) {
        per_type[type.empty() ? "(untyped)" : type] = {
            {"total", stats.total},
            {"correct", stats.correct},
            {"accuracy", stats.accuracy()},
        };
    }
    nlohmann::ordered_json families = nlohmann::ordered_json::object();
    for (const auto& [name, rate] : report.families) {
        families[name] = {
            {"groups", rate.groups},
            {"correct", rate.correct},
            {"rate", rate.rate()},
        };
    }
    nlohmann::ordered_json predictions = nlohmann::ordered_json::array();
    for (const auto& p : report.predictions) {
        nlohmann::ordered_json entry{
            {"id", p.item_id},
            {"correct", p.correct},
            {"parse_ok", p.parse_ok},
            {"prompt_tokens", p.prompt_tokens},
            {"completion_tokens", p.completion_tokens},
        };
        if (p.parse_ok) entry["parsed"] = payload_to_json(p.parsed);
        if (!p.error.empty()) entry["error"] = p.error;
        entry["raw_response"] = p.raw_response;
        predictions.push_back(std::move(entry));
    }
    return nlohmann::ordered_json{
        {"condition", condition_name(report.condition)},
        {"config_digest", report.config_digest},
        {"total", report.total},
        {"correct", report.correct},
        {"overall", report.overall},
        {"per_type", std::move(per_type)},
        {"families", std::move(families)},
        {"tokens",
         {{"correct",
           {{"count", report.tokens_correct.count},
            {"prompt_tokens", report.tokens_correct.prompt_tokens},
            {"completion_tokens", report.tokens_correct.completion_tokens}}},
          {"incorrect",
           {{"count", report.tokens_incorrect.count},
            {"prompt_tokens", report.tokens_incorrect.prompt_tokens},
            {"completion_tokens", report.tokens_incorrect.completion_tokens}}}}},
        {"predictions", std::move(predictions)},
    };
}

std::string report_table(const EvalReport& report) {
    std::ostringstream out;
    out << "condition: " << condition_name(report.condition) << "\n";
    out << "overall:   " << format3(report.overall) << " (" << report.correct << "/"
        << report.total << ")\n";
    out << "\nper question type:\n";
    for (const auto& [type, stats] : report.per_type) {
        out << "  " << (type.empty() ? "(untyped)" : type) << ": " << format3(stats.accuracy())
            << " (" << stats.correct << "/" << stats.total << ")\n";
    }
    out << "\ngrouped all-correct:\n";
    for (const auto& [name, rate] : report.families) {
        out << "  " << name << ": " << format3(rate.rate()) << " (" << rate.correct << "/"
            << rate.groups << " groups)\n";
    }
    out << "\ntokens: correct avg completion=";
    out << (report.tokens_correct.count == 0
                ? 0.0
                : static_cast<double>(report.tokens_correct.completion_tokens) /
                      static_cast<double>(report.tokens_correct.count));
    out << ", incorrect avg completion=";
    out << (report.tokens_incorrect.count == 0
                ? 0.0
                : static_cast<double>(report.tokens_incorrect.completion_tokens) /
                      static_cast<double>(report.tokens_incorrect.count));
    out << "\n";
    return out.str();
}

TraceStore::TraceStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto doc = nlohmann::json::parse(line);
            records_[doc.at("key").get<std::string>()] = trace_from_json(doc.at("doc"));
        } catch (const std::exception& e) {
            throw StoreError("corrupt trace store " + path_.string() + " line " +
                             std::to_string(line_no) + ": " + e.what());
        }
    }
}

TraceDocument TraceStore::get_or_compute(const std::string& context, const std::string& agent,
                                         const std::string& config_digest,
                                         const std::function<TraceDocument()>& compute) {
    const std::string key = sha256_hex(context) + ":" + agent + ":" + config_digest;

    std::unique_lock lock(mutex_);
    if (auto it = records_.find(key); it != records_.end()) {
        return it->second;
    }
    if (auto it = inflight_.find(key); it != inflight_.end()) {
        auto future = it->second;
        lock.unlock();
        return future.get();
    }
    std::promise<TraceDocument> promise;
    inflight_[key] = promise.get_future().share();
    lock.unlock();

    TraceDocument doc;
    try {
        doc = compute();
    } catch (...) {
        promise.set_exception(std::current_exception());
        lock.lock();
        inflight_.erase(key);
        throw;
    }
    promise.set_value(doc);

    lock.lock();
    records_[key] = doc;
    ++computed_;
    inflight_.erase(key);

    nlohmann::ordered_json record{
        {"key", key},
        {"agent", agent},
        {"context_digest", sha256_hex(context)},
        {"config_digest", config_digest},
        {"doc", trace_to_json(doc)},
    };
    if (!path_.parent_path().empty()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        throw StoreError("trace store is not writable: " + path_.string());
    }
    out << record.dump() << '\n';
    return doc;
}

long TraceStore::computed_count() const {
    std::lock_guard lock(mutex_);
    return computed_;
}

std::size_t TraceStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

TraceDocument prepare_trace(const EvalItem& item, const EngineConfig& config, Backend& backend,
                            TraceStore& store, ResponseCache* cache) {
    if (trim(item.target_agent).empty()) {
        throw Error("item '" + item.id + "' has no target_agent; cannot trace");
    }
    const std::string config_digest = sha256_hex(config.canonical() + backend.id());
    return store.get_or_compute(item.context, item.target_agent, config_digest, [&]() {
        Engine engine(config, backend, cache);
        return engine.trace(item.context, item.target_agent);
    });
}

EvalReport run_eval(const std::vector<EvalItem>& items, const EvalRunOptions& options,
                    Backend& backend, TraceStore* trace_store, ResponseCache* cache) {
    const bool needs_trace =
        options.condition == Condition::TT || options.condition == Condition::TTCoT;
    if (needs_trace && trace_store == nullptr) {
        throw std::invalid_argument("TT conditions require a trace store");
    }

    std::vector<Prediction> predictions(items.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= items.size()) break;
            const EvalItem& item = items[index];
            Prediction prediction;
            prediction.item_id = item.id;
            prediction.condition = options.condition;
            try {
                std::optional<TraceDocument> trace;
                if (needs_trace) {
                    trace = prepare_trace(item, options.engine, backend, *trace_store, cache);
                }
                prediction = answer_question(item, trace ? &*trace : nullptr, options.condition,
                                             backend, cache, options.engine.max_output);
            } catch (const std::exception& e) {
                prediction.correct = false;
                prediction.parse_ok = false;
                prediction.error = e.what();
            }
            predictions[index] = std::move(prediction);
        }
    };

    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }

    EvalReport report = aggregate(predictions, items, options.families);
    report.condition = options.condition;
    report.config_digest = options.config_digest;
    return report;
}

}  // namespace tracer
