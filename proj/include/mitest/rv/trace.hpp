// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mitest/core/types.hpp"

namespace mitest::rv {

// One service session reconstructed from an event log: the (stimulus,
// payload) steps of a single Enter->...->Exit traversal (or a prefix of one).
struct SessionTrace {
  std::string service_id;
  std::size_t session_index = 0;  // 0-based, per service
  std::vector<std::pair<std::string, std::string>> steps;
  // True when the last control event landed on Exit.
  bool completed = false;
};

// Splits a log into per-service session traces. Control-flow events define
// the steps; each step's payload comes from the data-flow event sharing the
// control event's (timestamp, feature), or "" when none exists (dropped
// output). A new session starts when the previous arc ended at Exit or when
// arc continuity breaks (cur.from != prev.to).
std::vector<SessionTrace> extract_service_traces(const core::EventLog& log);

}  // namespace mitest::rv
