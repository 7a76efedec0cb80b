#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tracer/prompts.hpp"

namespace tracer {

enum class Decoding { Greedy };

struct ModelRequest {
    TemplateId template_id = TemplateId::QaDirect;
    Bindings bindings;
    Decoding decoding = Decoding::Greedy;
    int max_output = 1024;
};

struct ModelResponse {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool cached = false;
    bool approximate_tokens = false;  // counts estimated, not provider-reported
};

std::string rendered_prompt(const ModelRequest& request);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual ModelResponse complete(const ModelRequest& request) = 0;
};

/// One scripted reply. A rendered prompt matches an entry either exactly or
/// when the prompt starts with the entry's match text; exact matches take
/// precedence over prefix matches, first entry wins within each pass.
struct ScriptEntry {
    std::string match;
    std::string reply;
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
};

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> entries, std::string id = "scripted");
    static ScriptedBackend from_file(const std::filesystem::path& path);

    std::string id() const override { return id_; }
    ModelResponse complete(const ModelRequest& request) override;

private:
    std::vector<ScriptEntry> entries_;
    std::string id_;
};

struct HttpBackendConfig {
    std::string base_url;
    std::string chat_path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key_env = "THOUGHT_TRACER_API_KEY";
    int max_retries = 3;
    int initial_backoff_ms = 250;
    int timeout_seconds = 60;
};

/// Chat-completion client. Sends a single-turn user message with temperature
/// pinned to 0 and retries transient failures with exponential backoff.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::string id() const override;
    ModelResponse complete(const ModelRequest& request) override;

private:
    HttpBackendConfig config_;
};

}  // namespace tracer
