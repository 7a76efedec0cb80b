#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "tracer/backend.hpp"

namespace tracer {

struct CacheKey {
    std::string hex;
    bool operator==(const CacheKey&) const = default;
};

CacheKey make_cache_key(std::string_view backend_id, TemplateId template_id,
                        std::string_view rendered_prompt, Decoding decoding, int max_output);

/// Append-only JSONL store of model responses, keyed by hex digest.
/// Writes are serialized; reads see writes made within the process.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path path);

    std::optional<ModelResponse> lookup(const CacheKey& key) const;
    void store(const CacheKey& key, TemplateId template_id, const ModelResponse& response);
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    struct Record {
        std::string template_id;
        std::string text;
        long prompt_tokens = 0;
        long completion_tokens = 0;
        bool approximate_tokens = false;
    };

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Record> records_;
};

/// Returns the cached response when present (cached=true, no backend call);
/// otherwise calls the backend, persists the response, and returns it.
ModelResponse cached_complete(Backend& backend, const ModelRequest& request,
                              ResponseCache& cache);

/// Dispatches through the cache when one is supplied.
ModelResponse backend_call(Backend& backend, const ModelRequest& request, ResponseCache* cache);

}  // namespace tracer
