#include <doctest.h>

#include <fstream>
#include <set>

#include "support/counting_backend.hpp"
#include "support/temp_dir.hpp"
#include "tracer/cache.hpp"
#include "tracer/errors.hpp"

using namespace tracer;
using namespace tracer::testing;

namespace {

ModelRequest request_for(const std::string& hypothesis, int max_output = 1024) {
    ModelRequest request;
    request.template_id = TemplateId::Rejuvenation;
    request.bindings = {{"hypothesis", hypothesis}};
    request.max_output = max_output;
    return request;
}

}  // namespace

TEST_CASE("cache keys react to every field") {
    const std::string prompt = "same prompt";
    auto base = make_cache_key("b1", TemplateId::QaDirect, prompt, Decoding::Greedy, 256);
    CHECK(base == make_cache_key("b1", TemplateId::QaDirect, prompt, Decoding::Greedy, 256));
    CHECK_FALSE(base == make_cache_key("b2", TemplateId::QaDirect, prompt, Decoding::Greedy, 256));
    CHECK_FALSE(base == make_cache_key("b1", TemplateId::QaCot, prompt, Decoding::Greedy, 256));
    CHECK_FALSE(base == make_cache_key("b1", TemplateId::QaDirect, "other", Decoding::Greedy, 256));
    CHECK_FALSE(base == make_cache_key("b1", TemplateId::QaDirect, prompt, Decoding::Greedy, 257));
}

TEST_CASE("cached_complete calls the backend once per distinct request") {
    TempDir dir;
    ResponseCache cache(dir.file("cache.jsonl"));
    ScriptedBackend scripted({{"", "reply", 5, 2}});
    CountingBackend backend(scripted);

    auto first = cached_complete(backend, request_for("h"), cache);
    CHECK_FALSE(first.cached);
    CHECK(first.text == "reply");

    auto second = cached_complete(backend, request_for("h"), cache);
    CHECK(second.cached);
    CHECK(second.text == "reply");
    CHECK(second.prompt_tokens == 5);
    CHECK(backend.calls() == 1);

    // a different token budget is a different key
    cached_complete(backend, request_for("h", 99), cache);
    CHECK(backend.calls() == 2);
    CHECK(cache.size() == 2);
}

TEST_CASE("cache store round-trips across reopen") {
    TempDir dir;
    const auto path = dir.file("cache.jsonl");
    ScriptedBackend scripted({{"", "persisted reply", 7, 3}});
    {
        ResponseCache cache(path);
        cached_complete(scripted, request_for("persist me"), cache);
    }
    ResponseCache reopened(path);
    CHECK(reopened.size() == 1);
    CountingBackend backend(scripted);
    auto hit = cached_complete(backend, request_for("persist me"), reopened);
    CHECK(hit.cached);
    CHECK(hit.text == "persisted reply");
    CHECK(backend.calls() == 0);
}

TEST_CASE("corrupt cache stores are rejected") {
    TempDir dir;
    const auto path = dir.file("cache.jsonl");
    std::ofstream(path) << "{not json}\n";
    CHECK_THROWS_AS(ResponseCache{path}, StoreError);
}

TEST_CASE("distinct prompts produce distinct keys") {
    std::set<std::string> keys;
    for (int i = 0; i < 500; ++i) {
        keys.insert(make_cache_key("b", TemplateId::QaDirect, "prompt " + std::to_string(i),
                                   Decoding::Greedy, 64)
                        .hex);
    }
    CHECK(keys.size() == 500);
}
