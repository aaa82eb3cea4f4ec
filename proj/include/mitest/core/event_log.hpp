// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "mitest/core/types.hpp"

namespace mitest::core {

/// Malformed event-log input. `line` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses newline-delimited JSON event records into a canonical-order log.
/// Throws ParseError on malformed records and on duplicate event ids.
EventLog parse_event_log(std::string_view text);

/// One JSON record per line, in log order. parse(serialize(log)) == log for
/// any valid log.
std::string serialize_event_log(const EventLog& log);

/// Control-flow probes record the traversed arc in the payload as
/// {"from": ..., "to": ...}.
std::string make_control_payload(const std::string& from, const std::string& to);
std::optional<std::pair<std::string, std::string>> parse_control_payload(
    const std::string& payload);

}  // namespace mitest::core
