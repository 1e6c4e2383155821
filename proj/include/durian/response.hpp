#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace durian {

// Token alphabet of the simulated policy. Answer tokens follow the three
// structural tokens: answer k is token id `first_answer + k`.
namespace tokens {
inline constexpr int think = 0;
inline constexpr int mark = 1;
inline constexpr int end = 2;
inline constexpr int first_answer = 3;

inline constexpr int answer(int k) { return first_answer + k; }
inline constexpr bool is_answer(int token) { return token >= first_answer; }
inline constexpr int vocab_size(int num_answers) { return first_answer + num_answers; }
}  // namespace tokens

// One sampled response together with the behaviour-policy log-probabilities
// recorded while it was generated.
struct ResponseRecord {
  std::vector<int> tokens;
  std::vector<double> logprobs;
  std::optional<std::string> answer;
  bool format_valid = false;

  std::size_t length() const noexcept { return tokens.size(); }
};

}  // namespace durian
