#include "tracer/config.hpp"

#include <fstream>
#include <sstream>

#include "tracer/digest.hpp"
#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

KvMap load_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw StoreError("cannot open config file: " + path.string());
    }
    KvMap kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw StoreError("config line " + std::to_string(line_no) +
                             " is not key=value: " + t);
        }
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

namespace {

bool parse_bool(const std::string& value) {
    const std::string v = to_lower(value);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw std::invalid_argument("not a boolean: " + value);
}

}  // namespace

BackendSpec BackendSpec::from_flag(const std::string& value) {
    BackendSpec spec;
    if (value.rfind("scripted:", 0) == 0) {
        spec.kind = Kind::Scripted;
        spec.script_path = value.substr(9);
        return spec;
    }
    if (value.rfind("http:", 0) == 0 || value.rfind("https:", 0) == 0) {
        spec.kind = Kind::Http;
        // "http:URL" selects the kind; a bare URL is the URL itself.
        std::string rest = value.substr(value.find(':') + 1);
        spec.http.base_url = rest.rfind("//", 0) == 0 ? value : rest;
        return spec;
    }
    throw std::invalid_argument("backend flag must be scripted:<path> or http:<base url>");
}

std::unique_ptr<Backend> BackendSpec::make() const {
    if (kind == Kind::Scripted) {
        if (script_path.empty() || !std::filesystem::exists(script_path)) {
            throw StoreError("scripted backend needs an existing script file: " + script_path);
        }
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(script_path));
    }
    if (http.base_url.empty()) {
        throw std::invalid_argument("http backend needs backend.base_url");
    }
    return std::make_unique<HttpBackend>(http);
}

std::string BackendSpec::describe() const {
    return kind == Kind::Scripted ? "scripted:" + script_path
                                  : "http:" + http.base_url + "#" + http.model;
}

RunConfig RunConfig::from_kv(const KvMap& kv) {
    RunConfig config;
    for (const auto& [key, value] : kv) {
        try {
            if (key == "engine.n_particles") config.engine.n_particles = std::stoi(value);
            else if (key == "engine.ess_threshold") config.engine.ess_threshold = std::stod(value);
            else if (key == "engine.rejuvenation_threshold")
                config.engine.rejuvenation_threshold = std::stod(value);
            else if (key == "engine.ablation_no_perception")
                config.engine.ablation_no_perception = parse_bool(value);
            else if (key == "engine.ablation_uniform_weights")
                config.engine.ablation_uniform_weights = parse_bool(value);
            else if (key == "engine.variant_self_correction")
                config.engine.variant_self_correction = parse_bool(value);
            else if (key == "engine.seed") config.engine.seed = std::stoull(value);
            else if (key == "engine.max_output") config.engine.max_output = std::stoi(value);
            else if (key == "engine.label_mode") {
                const std::string v = to_lower(value);
                if (v == "model") config.engine.label_mode = LabelMode::ModelBased;
                else if (v == "rule_dialogue" || v == "rule")
                    config.engine.label_mode = LabelMode::RuleBasedDialogue;
                else throw std::invalid_argument("label_mode must be model or rule_dialogue");
            } else if (key == "backend.kind") {
                const std::string v = to_lower(value);
                if (v == "scripted") config.backend.kind = BackendSpec::Kind::Scripted;
                else if (v == "http") config.backend.kind = BackendSpec::Kind::Http;
                else throw std::invalid_argument("backend.kind must be scripted or http");
            } else if (key == "backend.script_path") config.backend.script_path = value;
            else if (key == "backend.base_url") config.backend.http.base_url = value;
            else if (key == "backend.chat_path") config.backend.http.chat_path = value;
            else if (key == "backend.model") config.backend.http.model = value;
            else if (key == "backend.max_retries") config.backend.http.max_retries = std::stoi(value);
            else if (key == "backend.timeout_seconds")
                config.backend.http.timeout_seconds = std::stoi(value);
            else if (key == "cache.path") config.cache_path = value;
            else if (key == "trace_store.path") config.trace_store_path = value;
            else if (key == "run.condition") config.condition = condition_from_name(value);
            else if (key == "run.dataset") config.dataset_path = value;
            else if (key == "run.output") config.output_path = value;
            else if (key == "run.workers") config.workers = std::stoi(value);
            else if (key.rfind("harness.family.", 0) == 0) {
                MetricFamily family;
                family.name = key.substr(15);
                std::istringstream types(value);
                std::string type;
                while (std::getline(types, type, ',')) {
                    const std::string t = trim(type);
                    if (!t.empty()) family.question_types.insert(t);
                }
                config.families.push_back(std::move(family));
            } else {
                throw std::invalid_argument("unknown config key: " + key);
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw std::invalid_argument("bad value for " + key + ": " + e.what());
        }
    }
    return config;
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    out << engine.canonical();
    out << "backend=" << backend.describe() << '\n';
    out << "cache_path=" << cache_path << '\n';
    out << "trace_store_path=" << trace_store_path << '\n';
    out << "condition=" << condition_name(condition) << '\n';
    out << "dataset_path=" << dataset_path << '\n';
    out << "workers=" << workers << '\n';
    for (const auto& family : families) {
        out << "family." << family.name << '=';
        bool first = true;
        for (const auto& type : family.question_types) {
            if (!first) out << ',';
            out << type;
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

std::string RunConfig::digest() const { return sha256_hex(canonical()); }

}  // namespace tracer
