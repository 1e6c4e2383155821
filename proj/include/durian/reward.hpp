#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "durian/error.hpp"
#include "durian/response.hpp"

namespace durian {

struct ParsedResponse {
  bool has_think_block = false;
  std::optional<std::string> boxed_answer;
  int answer_markers = 0;
  // The response ended properly (END token, or a closed box in text form).
  bool terminated = false;
  // The think block comes before the first answer marker.
  bool think_before_answer = false;
  std::vector<int> tokens;
};

// Token grammar of a well-formed response: THINK* MARK <answer> END.
inline ParsedResponse parse_tokens(std::span<const int> seq) {
  ParsedResponse p;
  p.tokens.assign(seq.begin(), seq.end());
  std::size_t first_mark = seq.size();
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] != tokens::mark) continue;
    if (p.answer_markers++ == 0) first_mark = t;
  }
  bool prefix_is_think = true;
  for (std::size_t t = 0; t < first_mark; ++t) prefix_is_think &= seq[t] == tokens::think;
  p.has_think_block = prefix_is_think;
  p.think_before_answer = prefix_is_think && first_mark < seq.size();
  if (first_mark + 1 < seq.size() && tokens::is_answer(seq[first_mark + 1])) {
    p.boxed_answer = std::to_string(seq[first_mark + 1] - tokens::first_answer);
  }
  p.terminated = !seq.empty() && seq.back() == tokens::end && first_mark + 3 == seq.size();
  return p;
}

// Text form: "<think>...</think>" followed by exactly one "\boxed{...}".
// Literal substring scanning, first match wins; braces inside the box nest.
inline ParsedResponse parse_text(std::string_view text) {
  constexpr std::string_view open_think = "<think>";
  constexpr std::string_view close_think = "</think>";
  constexpr std::string_view box = "\\boxed{";

  ParsedResponse p;
  const auto think_at = text.find(open_think);
  std::size_t think_end = std::string_view::npos;
  if (think_at != std::string_view::npos) {
    const auto close_at = text.find(close_think, think_at + open_think.size());
    if (close_at != std::string_view::npos) {
      p.has_think_block = true;
      think_end = close_at + close_think.size();
    }
  }

  std::size_t first_box = std::string_view::npos;
  for (auto at = text.find(box); at != std::string_view::npos; at = text.find(box, at + box.size())) {
    if (p.answer_markers++ == 0) first_box = at;
  }
  if (first_box != std::string_view::npos) {
    int depth = 1;
    std::size_t i = first_box + box.size();
    for (; i < text.size(); ++i) {
      if (text[i] == '{') ++depth;
      if (text[i] == '}' && --depth == 0) break;
    }
    if (depth == 0) {
      p.boxed_answer = std::string(text.substr(first_box + box.size(), i - first_box - box.size()));
      p.terminated = true;
    }
  }
  p.think_before_answer = p.has_think_block && first_box != std::string_view::npos && think_end <= first_box;
  return p;
}

inline int format_reward(const ParsedResponse& p) {
  return p.has_think_block && p.think_before_answer && p.answer_markers == 1 && p.boxed_answer && p.terminated ? 1
                                                                                                               : 0;
}

inline int accuracy_reward(const ParsedResponse& p, std::string_view truth) {
  return p.boxed_answer && *p.boxed_answer == truth ? 1 : 0;
}

struct RewardWeights {
  double format = 0.1;
  double accuracy = 0.9;

  void validate() const {
    if (format < 0.0 || accuracy < 0.0 || !std::isfinite(format) || !std::isfinite(accuracy)) {
      throw Error(ErrorKind::invalid_config, "reward weights must be finite and nonnegative");
    }
    if (format + accuracy > 1.0 + 1e-12) {
      throw Error(ErrorKind::invalid_config, "reward weights must sum to at most 1");
    }
  }
};

inline double overall_reward(int format, int accuracy, const RewardWeights& w = {}) {
  if ((format != 0 && format != 1) || (accuracy != 0 && accuracy != 1)) {
    throw Error(ErrorKind::invalid_input, "reward components must be 0 or 1");
  }
  return w.format * format + w.accuracy * accuracy;
}

}  // namespace durian
