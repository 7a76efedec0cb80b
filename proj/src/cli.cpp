#include "tracer/cli.hpp"

#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tracer/config.hpp"
#include "tracer/digest.hpp"
#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

namespace {

struct CommonFlags {
    std::string config_path;
    std::string backend_flag;
    std::vector<std::string> ablate;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    std::string out_path;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key-value configuration file");
    cmd->add_option("--backend", flags.backend_flag,
                    "backend override: scripted:<path> or http:<base url>");
    cmd->add_option("--ablate", flags.ablate,
                    "variant switch: no-perception, uniform-weights, or self-correction")
        ->check(CLI::IsMember({"no-perception", "uniform-weights", "self-correction"}));
    cmd->add_option_function<std::uint64_t>(
           "--seed", [&flags](std::uint64_t v) { flags.seed = v; flags.seed_set = true; },
           "engine randomness seed");
    cmd->add_option("--workers", flags.workers, "harness worker count");
    cmd->add_option("--out", flags.out_path, "output path");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) {
        config = RunConfig::from_kv(load_kv_file(flags.config_path));
    }
    if (!flags.backend_flag.empty()) {
        config.backend = BackendSpec::from_flag(flags.backend_flag);
    }
    if (flags.seed_set) config.engine.seed = flags.seed;
    if (flags.workers > 0) config.workers = flags.workers;
    if (!flags.out_path.empty()) config.output_path = flags.out_path;
    for (const auto& ablation : flags.ablate) {
        if (ablation == "no-perception") config.engine.ablation_no_perception = true;
        else if (ablation == "uniform-weights") config.engine.ablation_uniform_weights = true;
        else if (ablation == "self-correction") config.engine.variant_self_correction = true;
    }
    return config;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StoreError("cannot write output file: " + path);
    out << content;
}

nlohmann::ordered_json stats_sidecar(const TraceDocument& doc, const RunConfig& config,
                                     const std::string& agent) {
    auto trace_json = trace_to_json(doc);
    return nlohmann::ordered_json{
        {"agent", agent},
        {"config_digest", config.digest()},
        {"seed", config.engine.seed},
        {"ablation_no_perception", config.engine.ablation_no_perception},
        {"ablation_uniform_weights", config.engine.ablation_uniform_weights},
        {"variant_self_correction", config.engine.variant_self_correction},
        {"steps", trace_json["steps"]},
        {"tokens", trace_json["tokens"]},
    };
}

int cmd_trace(const CommonFlags& flags, const std::string& context_path,
              const std::string& agent, std::ostream& out) {
    RunConfig config = resolve_config(flags);
    if (config.output_path.empty()) {
        throw CLI::RequiredError("--out");
    }
    std::ifstream in(context_path);
    if (!in) throw StoreError("cannot open context file: " + context_path);
    std::stringstream buffer;
    buffer << in.rdbuf();

    auto backend = config.backend.make();
    std::optional<ResponseCache> cache;
    if (!config.cache_path.empty()) cache.emplace(config.cache_path);

    Engine engine(config.engine, *backend, cache ? &*cache : nullptr);
    TraceDocument doc = engine.trace(buffer.str(), agent);

    write_file(config.output_path, doc.rendered);
    write_file(config.output_path + ".stats.json",
               stats_sidecar(doc, config, agent).dump(2) + "\n");
    out << "trace written to " << config.output_path << " (" << doc.steps.size() << " steps, "
        << doc.tokens.total_calls() << " backend calls)\n";
    return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& dataset_flag,
             const std::string& condition_flag, bool sweep, std::ostream& out) {
    RunConfig config = resolve_config(flags);
    if (!dataset_flag.empty()) config.dataset_path = dataset_flag;
    if (!condition_flag.empty()) config.condition = condition_from_name(condition_flag);
    if (config.dataset_path.empty()) {
        throw CLI::RequiredError("--dataset");
    }
    auto items = load_dataset(config.dataset_path);

    auto backend = config.backend.make();
    std::optional<ResponseCache> cache;
    if (!config.cache_path.empty()) cache.emplace(config.cache_path);
    std::optional<TraceStore> trace_store;
    if (!config.trace_store_path.empty()) trace_store.emplace(config.trace_store_path);

    std::vector<Condition> conditions;
    if (sweep) {
        conditions = {Condition::Baseline, Condition::CoT, Condition::TT, Condition::TTCoT};
    } else {
        conditions = {config.condition};
    }

    for (Condition condition : conditions) {
        const bool needs_trace = condition == Condition::TT || condition == Condition::TTCoT;
        if (needs_trace && !trace_store) {
            throw std::invalid_argument(
                "condition " + condition_name(condition) + " requires trace_store.path");
        }
        RunConfig run = config;
        run.condition = condition;
        EvalRunOptions options;
        options.condition = condition;
        options.engine = run.engine;
        options.workers = run.workers;
        options.families = run.families;
        options.config_digest = run.digest();
        EvalReport report = run_eval(items, options, *backend,
                                     trace_store ? &*trace_store : nullptr,
                                     cache ? &*cache : nullptr);
        out << report_table(report);
        if (!config.output_path.empty()) {
            std::string path = config.output_path;
            if (sweep) path += "." + condition_name(condition) + ".json";
            write_file(path, report_to_json(report).dump(2) + "\n");
            out << "report written to " << path << "\n";
        }
        out << "\n";
    }
    return 0;
}

int inspect_trace_sidecar(const nlohmann::json& doc, int step_filter, std::ostream& out) {
    out << "agent: " << doc.value("agent", "") << "\n";
    if (doc.contains("config_digest")) {
        out << "config digest: " << doc["config_digest"].get<std::string>() << "\n";
    }
    for (const auto& step : doc.at("steps")) {
        const int step_no = step.at("step").get<int>();
        if (step_filter > 0 && step_no != step_filter) continue;
        out << "step " << step_no << ": ess=";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", step.at("ess").get<double>());
        out << buf;
        out << (step.at("resampled").get<bool>() ? " resampled" : "");
        out << (step.at("rejuvenated").get<bool>() ? " rejuvenated" : "");
        out << "\n";
        double sum = 0.0;
        for (const auto& h : step.at("hypotheses")) {
            const double w = h.at("weight").get<double>();
            sum += w;
            std::snprintf(buf, sizeof(buf), "%.4f", w);
            out << "  [" << buf << "] " << h.at("text").get<std::string>() << "\n";
        }
        std::snprintf(buf, sizeof(buf), "%.2f", sum);
        out << "  weight sum: " << buf << "\n";
    }
    return 0;
}

int cmd_inspect(const std::string& path, int step_filter, std::ostream& out) {
    if (!std::filesystem::exists(path)) {
        throw NotFoundError("no such file: " + path);
    }
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();
    if (trim(content).empty()) {
        out << "0 entries\n";
        return 0;
    }

    // A stats sidecar is one JSON document with a "steps" array.
    try {
        auto doc = nlohmann::json::parse(content);
        if (doc.is_object() && doc.contains("steps")) {
            return inspect_trace_sidecar(doc, step_filter, out);
        }
    } catch (const nlohmann::json::exception&) {
        // fall through: JSONL store
    }

    // JSONL: either trace-store records (with "doc") or cache records.
    std::istringstream lines(content);
    std::string line;
    std::size_t entries = 0;
    std::map<std::string, long> per_template;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool any_trace = false;
    while (std::getline(lines, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw StoreError("corrupt store line: " + std::string(e.what()));
        }
        ++entries;
        if (record.contains("doc")) {
            any_trace = true;
            out << "trace " << entries << ": agent=" << record.value("agent", "")
                << " key=" << record.value("key", "").substr(0, 12) << "...\n";
            inspect_trace_sidecar(record["doc"], step_filter, out);
        } else {
            per_template[record.value("template_id", "?")] += 1;
            prompt_tokens += record.value("prompt_tokens", 0L);
            completion_tokens += record.value("completion_tokens", 0L);
        }
    }
    out << entries << " entries\n";
    if (!any_trace && entries > 0) {
        for (const auto& [name, count] : per_template) {
            out << "  " << name << ": " << count << "\n";
        }
        out << "  tokens: prompt=" << prompt_tokens << " completion=" << completion_tokens
            << "\n";
    }
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"trace agents' mental states and evaluate downstream question answering"};
    app.require_subcommand(1);

    CommonFlags trace_flags;
    std::string context_path;
    std::string agent;
    auto* trace_cmd = app.add_subcommand("trace", "trace one agent through a context file");
    trace_cmd->add_option("context", context_path, "context text file")->required();
    trace_cmd->add_option("--agent", agent, "target agent name")->required();
    add_common(trace_cmd, trace_flags);

    CommonFlags eval_flags;
    std::string dataset_flag;
    std::string condition_flag;
    bool sweep = false;
    auto* eval_cmd = app.add_subcommand("eval", "run a condition over a JSONL dataset");
    eval_cmd->add_option("--dataset", dataset_flag, "JSONL dataset path");
    eval_cmd->add_option("--condition", condition_flag, "baseline, cot, tt, or ttcot");
    eval_cmd->add_flag("--sweep", sweep, "run all four conditions");
    add_common(eval_cmd, eval_flags);

    std::string inspect_path;
    int step_filter = 0;
    auto* inspect_cmd =
        app.add_subcommand("inspect", "dump a trace sidecar, trace store, or response cache");
    inspect_cmd->add_option("path", inspect_path, "file to inspect")->required();
    inspect_cmd->add_option("--step", step_filter, "only print this step");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            // --help and friends
            out << app.help();
            return 0;
        }
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (trace_cmd->parsed()) return cmd_trace(trace_flags, context_path, agent, out);
        if (eval_cmd->parsed()) return cmd_eval(eval_flags, dataset_flag, condition_flag, sweep, out);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_path, step_filter, out);
    } catch (const CLI::RequiredError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace tracer
