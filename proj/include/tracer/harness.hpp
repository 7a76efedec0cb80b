#pragma once

#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracer/engine.hpp"

namespace tracer {

enum class AnswerMode { Choice, SetMatch, Binary };
enum class Condition { Baseline, CoT, TT, TTCoT };

std::string condition_name(Condition condition);
Condition condition_from_name(const std::string& name);
std::string answer_mode_name(AnswerMode mode);

/// Choice holds the option text, SetMatch a normalized name set, Binary a
/// yes/no flag.
using AnswerPayload = std::variant<std::string, std::set<std::string>, bool>;

struct EvalItem {
    std::string id;
    std::string context;
    std::string target_agent;  // may be empty; required for tracing
    std::string question;
    AnswerMode answer_mode = AnswerMode::Choice;
    std::vector<std::string> options;  // Choice only
    AnswerPayload gold;
    std::string question_type;
    std::string group_id;  // empty: the item forms its own group
};

struct Prediction {
    std::string item_id;
    Condition condition = Condition::Baseline;
    std::string raw_response;
    AnswerPayload parsed;
    bool parse_ok = false;
    bool correct = false;
    std::string error;  // parse or run failure reason
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

/// Named set of question types scored with the grouped all-correct rule.
/// An empty type set means every question type belongs to the family.
struct MetricFamily {
    std::string name;
    std::set<std::string> question_types;
};

struct TypeStats {
    long total = 0;
    long correct = 0;
    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

struct GroupRate {
    long groups = 0;
    long correct = 0;
    double rate() const { return groups == 0 ? 0.0 : static_cast<double>(correct) / groups; }
};

struct TokenSplit {
    long count = 0;
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct EvalReport {
    Condition condition = Condition::Baseline;
    long total = 0;
    long correct = 0;
    double overall = 0.0;
    std::map<std::string, TypeStats> per_type;
    std::map<std::string, GroupRate> families;
    TokenSplit tokens_correct;
    TokenSplit tokens_incorrect;
    std::string config_digest;
    std::vector<Prediction> predictions;  // dataset order
};

/// Parses a JSONL dataset, validating every item invariant. Errors carry the
/// 1-based line number and offending field.
std::vector<EvalItem> load_dataset(const std::filesystem::path& path);

/// The request answer_question will send, exposed so callers can pre-render
/// prompts (fixture generation, debugging).
ModelRequest qa_request(const EvalItem& item, const TraceDocument* trace, Condition condition,
                        int max_output);

Prediction answer_question(const EvalItem& item, const TraceDocument* trace, Condition condition,
                           Backend& backend, ResponseCache* cache = nullptr,
                           int max_output = 1024);

/// Joins predictions to items and folds per-type accuracy, grouped
/// all-correct rates per family, and token statistics split by correctness.
EvalReport aggregate(const std::vector<Prediction>& predictions,
                     const std::vector<EvalItem>& items,
                     const std::vector<MetricFamily>& families);

nlohmann::ordered_json report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

/// Disk-backed store of computed traces keyed by (context digest, agent,
/// config digest). Concurrent requests for one key run the computation once.
class TraceStore {
public:
    explicit TraceStore(std::filesystem::path path);

    TraceDocument get_or_compute(const std::string& context, const std::string& agent,
                                 const std::string& config_digest,
                                 const std::function<TraceDocument()>& compute);

    long computed_count() const;
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, TraceDocument> records_;
    std::map<std::string, std::shared_future<TraceDocument>> inflight_;
    long computed_ = 0;
};

/// Returns the stored trace for the item's context and agent, computing it
/// through the engine at most once per key.
TraceDocument prepare_trace(const EvalItem& item, const EngineConfig& config, Backend& backend,
                            TraceStore& store, ResponseCache* cache = nullptr);

struct EvalRunOptions {
    Condition condition = Condition::Baseline;
    EngineConfig engine;
    int workers = 1;
    std::vector<MetricFamily> families;
    std::string config_digest;
};

/// Runs one condition over the whole dataset. Per-item failures become
/// incorrect predictions with the error recorded; the run continues.
EvalReport run_eval(const std::vector<EvalItem>& items, const EvalRunOptions& options,
                    Backend& backend, TraceStore* trace_store, ResponseCache* cache);

}  // namespace tracer
