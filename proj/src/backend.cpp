#include "tracer/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tracer/errors.hpp"
#include "tracer/text.hpp"

namespace tracer {

std::string rendered_prompt(const ModelRequest& request) {
    return render_prompt(request.template_id, request.bindings);
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> entries, std::string id)
    : entries_(std::move(entries)), id_(std::move(id)) {}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw StoreError("cannot open script file: " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw StoreError("malformed script file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw StoreError("script file must hold a JSON array: " + path.string());
    }
    std::vector<ScriptEntry> entries;
    entries.reserve(doc.size());
    for (const auto& item : doc) {
        ScriptEntry entry;
        entry.match = item.at("match").get<std::string>();
        entry.reply = item.at("reply").get<std::string>();
        if (item.contains("prompt_tokens")) entry.prompt_tokens = item["prompt_tokens"].get<long>();
        if (item.contains("completion_tokens")) {
            entry.completion_tokens = item["completion_tokens"].get<long>();
        }
        entries.push_back(std::move(entry));
    }
    return ScriptedBackend(std::move(entries), "scripted:" + path.filename().string());
}

ModelResponse ScriptedBackend::complete(const ModelRequest& request) {
    const std::string prompt = rendered_prompt(request);
    const ScriptEntry* hit = nullptr;
    for (const auto& entry : entries_) {
        if (entry.match == prompt) {
            hit = &entry;
            break;
        }
    }
    if (hit == nullptr) {
        for (const auto& entry : entries_) {
            if (prompt.size() >= entry.match.size() &&
                prompt.compare(0, entry.match.size(), entry.match) == 0) {
                hit = &entry;
                break;
            }
        }
    }
    if (hit == nullptr) {
        throw ScriptMissError("no scripted entry for prompt: " + prompt.substr(0, 120));
    }
    ModelResponse response;
    response.text = hit->reply;
    response.approximate_tokens = !hit->prompt_tokens.has_value() || !hit->completion_tokens.has_value();
    response.prompt_tokens = hit->prompt_tokens.value_or(approx_token_count(prompt));
    response.completion_tokens = hit->completion_tokens.value_or(approx_token_count(hit->reply));
    return response;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpBackend::id() const { return "http:" + config_.base_url + "#" + config_.model; }

ModelResponse HttpBackend::complete(const ModelRequest& request) {
    const std::string prompt = rendered_prompt(request);

    nlohmann::json body{
        {"model", config_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", 0},
        {"max_tokens", request.max_output},
    };

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    int backoff_ms = config_.initial_backoff_ms;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);

        auto result = client.Post(config_.chat_path, headers, body.dump(), "application/json");
        if (!result) {
            last_error = httplib::to_string(result.error());
            continue;  // connection-level failure, retry
        }
        if (result->status == 429 || result->status >= 500) {
            last_error = "HTTP " + std::to_string(result->status);
            continue;
        }
        if (result->status != 200) {
            throw BackendError(BackendError::Kind::Fatal,
                               "HTTP " + std::to_string(result->status) + ": " +
                                   result->body.substr(0, 200));
        }

        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(result->body);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(BackendError::Kind::Fatal,
                               std::string("unparseable completion body: ") + e.what());
        }
        ModelResponse response;
        try {
            response.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(BackendError::Kind::Fatal,
                               std::string("completion body missing choices: ") + e.what());
        }
        if (reply.contains("usage") && reply["usage"].is_object()) {
            const auto& usage = reply["usage"];
            response.prompt_tokens = usage.value("prompt_tokens", 0L);
            response.completion_tokens = usage.value("completion_tokens", 0L);
        } else {
            response.prompt_tokens = approx_token_count(prompt);
            response.completion_tokens = approx_token_count(response.text);
            response.approximate_tokens = true;
        }
        return response;
    }
    throw BackendError(BackendError::Kind::Transient,
                       "backend unreachable after " + std::to_string(config_.max_retries + 1) +
                           " attempts: " + last_error);
}

}  // namespace tracer
