#pragma once

#include <string>
#include <string_view>

namespace tracer {

/// SHA-256 hex digest.
std::string sha256_hex(std::string_view data);

}  // namespace tracer
