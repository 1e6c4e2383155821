#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "durian/error.hpp"
#include "durian/reward.hpp"
#include "durian/sim/extreme_stats.hpp"

namespace durian {

struct RewardLogAnalysis {
  std::vector<std::pair<std::size_t, sim::ExtremeStats>> steps;
  // Groups that did not have exactly G distinct rollouts.
  std::size_t excluded_groups = 0;
};

namespace detail {

inline std::string id_text(const nlohmann::json& v, const char* field, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw Error(ErrorKind::invalid_input, "line " + std::to_string(line) + ": '" + field + "' must be a string or integer");
}

inline int record_accuracy(const nlohmann::json& rec, std::size_t line) {
  if (rec.contains("accuracy")) {
    const auto& a = rec["accuracy"];
    if (a.is_boolean()) return a.get<bool>() ? 1 : 0;
    if (a.is_number()) {
      const double v = a.get<double>();
      if (v == 0.0 || v == 1.0) return static_cast<int>(v);
    }
    throw Error(ErrorKind::invalid_input, "line " + std::to_string(line) + ": 'accuracy' must be 0 or 1");
  }
  if (!rec.contains("truth")) {
    throw Error(ErrorKind::invalid_input,
                "line " + std::to_string(line) + ": record needs 'accuracy' or a response with 'truth'");
  }
  const std::string truth = id_text(rec["truth"], "truth", line);
  if (rec.contains("response_text") && rec["response_text"].is_string()) {
    return accuracy_reward(parse_text(rec["response_text"].get<std::string>()), truth);
  }
  if (rec.contains("token_ids") && rec["token_ids"].is_array()) {
    std::vector<int> toks;
    for (const auto& t : rec["token_ids"]) {
      if (!t.is_number_integer()) {
        throw Error(ErrorKind::invalid_input, "line " + std::to_string(line) + ": token_ids must be integers");
      }
      toks.push_back(t.get<int>());
    }
    return accuracy_reward(parse_tokens(toks), truth);
  }
  throw Error(ErrorKind::invalid_input,
              "line " + std::to_string(line) + ": record needs 'response_text' or 'token_ids' next to 'truth'");
}

}  // namespace detail

// Reads JSONL reward records {step?, sample_id, rollout_id, accuracy} (or a
// response plus truth instead of accuracy) and tabulates reward patterns per
// step. A missing step field means step 1. The result does not depend on
// record order.
inline RewardLogAnalysis analyze_reward_log(std::istream& in, std::size_t group) {
  if (group < 2) throw Error(ErrorKind::invalid_config, "rollout size must be >= 2");
  struct Group {
    std::map<std::string, int> by_rollout;
    bool duplicate = false;
  };
  std::map<std::size_t, std::map<std::string, Group>> steps;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("sample_id") || !rec.contains("rollout_id")) {
      throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": needs sample_id and rollout_id");
    }
    std::size_t step = 1;
    if (rec.contains("step")) {
      if (!rec["step"].is_number_unsigned()) {
        throw Error(ErrorKind::invalid_input, "line " + std::to_string(line_no) + ": step must be a nonnegative integer");
      }
      step = rec["step"].get<std::size_t>();
    }
    auto& g = steps[step][detail::id_text(rec["sample_id"], "sample_id", line_no)];
    const auto rollout = detail::id_text(rec["rollout_id"], "rollout_id", line_no);
    const int acc = detail::record_accuracy(rec, line_no);
    if (!g.by_rollout.emplace(rollout, acc).second) g.duplicate = true;
  }

  RewardLogAnalysis out;
  for (const auto& [step, samples] : steps) {
    std::vector<std::vector<int>> rows;
    for (const auto& [id, g] : samples) {
      if (g.duplicate || g.by_rollout.size() != group) {
        ++out.excluded_groups;
        continue;
      }
      std::vector<int> row;
      for (const auto& [rid, acc] : g.by_rollout) row.push_back(acc);
      rows.push_back(std::move(row));
    }
    out.steps.emplace_back(step, sim::extreme_stats(rows));
  }
  return out;
}

}  // namespace durian
