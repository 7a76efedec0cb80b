#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tracer/backend.hpp"
#include "tracer/engine.hpp"
#include "tracer/harness.hpp"

namespace tracer {

using KvMap = std::map<std::string, std::string>;

/// Flat "section.key=value" file; '#' starts a comment, blank lines ignored.
KvMap load_kv_file(const std::filesystem::path& path);

struct BackendSpec {
    enum class Kind { Scripted, Http };
    Kind kind = Kind::Scripted;
    std::string script_path;
    HttpBackendConfig http;

    /// Parses "scripted:<path>" or "http:<base url>" flag values.
    static BackendSpec from_flag(const std::string& value);
    std::unique_ptr<Backend> make() const;
    std::string describe() const;
};

struct RunConfig {
    EngineConfig engine;
    BackendSpec backend;
    std::string cache_path;
    std::string trace_store_path;
    Condition condition = Condition::Baseline;
    std::string dataset_path;
    std::string output_path;
    int workers = 1;
    std::vector<MetricFamily> families;

    static RunConfig from_kv(const KvMap& kv);
    std::string canonical() const;
    std::string digest() const;
};

}  // namespace tracer
