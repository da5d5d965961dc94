#pragma once

#include <charconv>
#include <string>

namespace fdiag {

/// Shortest decimal text that parses back to exactly `value`.
inline std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

}  // namespace fdiag
