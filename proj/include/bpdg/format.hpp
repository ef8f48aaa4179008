#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

namespace bpdg {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Parses the whole of `text` as a double; nothing may trail the number.
inline bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

}  // namespace bpdg
