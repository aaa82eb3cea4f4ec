// SPDX-License-Identifier: Apache-2.0
#include "mitest/core/codebook.hpp"

#include <stdexcept>

#include <json.hpp>

namespace mitest::core {

using nlohmann::json;

std::pair<std::vector<int>, Codebook> encode_log(const EventLog& log, Codebook book) {
  std::vector<int> codes;
  codes.reserve(log.events.size());
  for (const auto& ev : log.events) {
    auto it = book.codes.find(ev.feature_id);
    if (it == book.codes.end()) {
      it = book.codes.emplace(ev.feature_id, book.next_code).first;
      ++book.next_code;
    }
    codes.push_back(it->second);
  }
  return {std::move(codes), std::move(book)};
}

nlohmann::json codebook_to_json(const Codebook& book) {
  json codes = json::object();
  for (const auto& [feature, code] : book.codes) codes[feature] = code;
  return json{{"codes", std::move(codes)}, {"next_code", book.next_code}};
}

Codebook codebook_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("codes") || !j.at("codes").is_object())
    throw std::invalid_argument("codebook JSON must be an object with a 'codes' object");
  Codebook book;
  int max_code = -1;
  for (const auto& [feature, code] : j.at("codes").items()) {
    if (!code.is_number_integer() || code.get<int>() < 0)
      throw std::invalid_argument("codebook codes must be non-negative integers");
    auto [it, inserted] = book.codes.emplace(feature, code.get<int>());
    (void)it;
    if (!inserted) throw std::invalid_argument("duplicate feature in codebook: " + feature);
    max_code = std::max(max_code, code.get<int>());
  }
  // Trust an explicit next_code when present; otherwise resume after the densest prefix.
  if (j.contains("next_code")) {
    if (!j.at("next_code").is_number_integer() || j.at("next_code").get<int>() <= max_code)
      throw std::invalid_argument("next_code must exceed every assigned code");
    book.next_code = j.at("next_code").get<int>();
  } else {
    book.next_code = max_code + 1;
  }
  return book;
}

}  // namespace mitest::core
