#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "durian/advantage.hpp"
#include "durian/format.hpp"

namespace durian::sim {

// Per-step reward pattern counts over a batch of accuracy rewards.
struct ExtremeStats {
  std::size_t batch = 0;
  std::size_t zero_variance = 0;
  std::size_t effective = 0;
  std::size_t extreme_success = 0;  // G - 1 correct, 1 wrong
  std::size_t extreme_failure = 0;  // 1 correct, G - 1 wrong
  std::size_t extreme_rows = 0;     // rows in either pattern (they coincide when G = 2)

  std::optional<double> ratio() const {
    if (effective == 0) return std::nullopt;
    return static_cast<double>(extreme_rows) / static_cast<double>(effective);
  }
};

// Counts patterns row by row from binary accuracy rewards.
inline ExtremeStats extreme_stats(std::span<const std::vector<int>> rows) {
  ExtremeStats st;
  st.batch = rows.size();
  for (const auto& row : rows) {
    std::size_t correct = 0;
    for (int a : row) correct += a != 0;
    const std::size_t g = row.size();
    if (correct == 0 || correct == g) {
      ++st.zero_variance;
      continue;
    }
    const bool success = correct + 1 == g;
    const bool failure = correct == 1;
    st.extreme_success += success;
    st.extreme_failure += failure;
    st.extreme_rows += success || failure;
  }
  st.effective = st.batch - st.zero_variance;
  return st;
}

inline ExtremeStats extreme_stats(const RewardMatrix& accuracy) {
  std::vector<std::vector<int>> rows(accuracy.batch());
  for (std::size_t s = 0; s < accuracy.batch(); ++s)
    for (double v : accuracy.row(s)) rows[s].push_back(v >= 0.5 ? 1 : 0);
  return extreme_stats(rows);
}

inline std::string format_ratio(const ExtremeStats& st) {
  const auto r = st.ratio();
  return r ? fmt_fixed(100.0 * *r, 1) + "%" : "-";
}

// Table with one column per reported step, row labels as in the reward
// statistics report: effective samples, both extreme patterns, total ratio.
inline std::string format_extreme_table(std::span<const std::pair<std::size_t, ExtremeStats>> columns,
                                        std::size_t group) {
  const std::string many = std::to_string(group > 0 ? group - 1 : 0);
  std::string rows[5] = {
      "Training steps",
      "Effective samples (participating in training)",
      "Extreme success (" + many + " correct & 1 wrong)",
      "Extreme failure (" + many + " wrong & 1 correct)",
      "Total Extreme Ratio",
  };
  for (const auto& [step, st] : columns) {
    rows[0] += "," + std::to_string(step);
    rows[1] += "," + std::to_string(st.effective);
    rows[2] += "," + std::to_string(st.extreme_success);
    rows[3] += "," + std::to_string(st.extreme_failure);
    rows[4] += "," + format_ratio(st);
  }
  std::string out;
  for (const auto& r : rows) out += r + "\n";
  return out;
}

// Steps 1, 10, 20, ... up to `steps`, plus the final step.
inline std::vector<std::size_t> report_steps(std::size_t steps) {
  std::vector<std::size_t> out;
  if (steps == 0) return out;
  out.push_back(1);
  for (std::size_t s = 10; s <= steps; s += 10) out.push_back(s);
  if (out.back() != steps) out.push_back(steps);
  return out;
}

}  // namespace durian::sim
