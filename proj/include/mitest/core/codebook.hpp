// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mitest/core/types.hpp"

namespace mitest::core {

/// Feature -> integer code table. Codes grown from an empty book form the
/// dense range 0..n-1 and are never reassigned.
struct Codebook {
  std::map<std::string, int> codes;
  int next_code = 0;

  friend bool operator==(const Codebook&, const Codebook&) = default;
};

/// Integer abstraction of an execution log: maps every event's feature_id
/// through the codebook, assigning fresh codes in first-seen order. Returns
/// the code sequence and the extended codebook.
std::pair<std::vector<int>, Codebook> encode_log(const EventLog& log, Codebook codebook);

nlohmann::json codebook_to_json(const Codebook& book);
Codebook codebook_from_json(const nlohmann::json& j);

}  // namespace mitest::core
