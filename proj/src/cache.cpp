#include "tracer/cache.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "tracer/digest.hpp"
#include "tracer/errors.hpp"

namespace tracer {

namespace {

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

CacheKey make_cache_key(std::string_view backend_id, TemplateId template_id,
                        std::string_view rendered_prompt, Decoding decoding, int max_output) {
    std::string material;
    material.reserve(rendered_prompt.size() + 64);
    material.append(backend_id);
    material.push_back('\x1f');
    material.append(template_name(template_id));
    material.push_back('\x1f');
    material.append(rendered_prompt);
    material.push_back('\x1f');
    material.append(decoding == Decoding::Greedy ? "greedy" : "other");
    material.push_back('\x1f');
    material.append(std::to_string(max_output));
    return CacheKey{sha256_hex(material)};
}

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;  // a fresh store; created on first write
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
            Record record;
            record.template_id = doc.at("template_id").get<std::string>();
            record.text = doc.at("text").get<std::string>();
            record.prompt_tokens = doc.at("prompt_tokens").get<long>();
            record.completion_tokens = doc.at("completion_tokens").get<long>();
            record.approximate_tokens = doc.value("approximate_tokens", false);
            records_[doc.at("key").get<std::string>()] = std::move(record);
        } catch (const nlohmann::json::exception& e) {
            throw StoreError("corrupt cache store " + path_.string() + " line " +
                             std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::optional<ModelResponse> ResponseCache::lookup(const CacheKey& key) const {
    std::lock_guard lock(mutex_);
    auto it = records_.find(key.hex);
    if (it == records_.end()) return std::nullopt;
    ModelResponse response;
    response.text = it->second.text;
    response.prompt_tokens = it->second.prompt_tokens;
    response.completion_tokens = it->second.completion_tokens;
    response.approximate_tokens = it->second.approximate_tokens;
    response.cached = true;
    return response;
}

void ResponseCache::store(const CacheKey& key, TemplateId template_id,
                          const ModelResponse& response) {
    std::lock_guard lock(mutex_);
    nlohmann::ordered_json doc{
        {"key", key.hex},
        {"template_id", template_name(template_id)},
        {"text", response.text},
        {"prompt_tokens", response.prompt_tokens},
        {"completion_tokens", response.completion_tokens},
        {"approximate_tokens", response.approximate_tokens},
        {"created_at", utc_timestamp()},
    };
    if (!path_.parent_path().empty()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        throw StoreError("cache store is not writable: " + path_.string());
    }
    out << doc.dump() << '\n';
    if (!out) {
        throw StoreError("failed to append to cache store: " + path_.string());
    }
    records_[key.hex] = Record{template_name(template_id), response.text, response.prompt_tokens,
                               response.completion_tokens, response.approximate_tokens};
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

ModelResponse cached_complete(Backend& backend, const ModelRequest& request,
                              ResponseCache& cache) {
    const std::string prompt = rendered_prompt(request);
    const CacheKey key = make_cache_key(backend.id(), request.template_id, prompt,
                                        request.decoding, request.max_output);
    if (auto hit = cache.lookup(key)) {
        return *hit;
    }
    ModelResponse response = backend.complete(request);
    cache.store(key, request.template_id, response);
    response.cached = false;
    return response;
}

ModelResponse backend_call(Backend& backend, const ModelRequest& request, ResponseCache* cache) {
    if (cache != nullptr) return cached_complete(backend, request, *cache);
    return backend.complete(request);
}

}  // namespace tracer
