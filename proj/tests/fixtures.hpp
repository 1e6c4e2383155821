#pragma once

// On-disk fixtures for the CLI: feature matrices with known spectra and a
// reward log planted with known per-step pattern counts.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "durian/feature_io.hpp"
#include "durian/linalg.hpp"

namespace fixtures {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("durian_fixture_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Rows +-e_k (k < rank) padded with zero rows; centered spectrum is flat.
inline durian::Matrix flat_rank(std::size_t rank, std::size_t patches, std::size_t dim) {
  durian::Matrix f(patches, dim);
  for (std::size_t k = 0; k < rank; ++k) {
    f(2 * k, k) = 1.0;
    f(2 * k + 1, k) = -1.0;
  }
  return f;
}

inline durian::Matrix rank_one(std::size_t patches, std::size_t dim) {
  durian::Matrix f(patches, dim);
  for (std::size_t i = 0; i < patches; ++i)
    for (std::size_t c = 0; c < dim; ++c) f(i, c) = static_cast<double>(i) * (1.0 + static_cast<double>(c)) + 0.5;
  return f;
}

struct PlantedStep {
  std::size_t step = 1;
  std::size_t zero_variance = 0;
  std::size_t extreme_success = 0;
  std::size_t extreme_failure = 0;
  std::size_t other = 0;  // rows with 2..G-2 correct
};

// One JSON line per rollout; record order is shuffled with `shuffle_seed`.
// A few records spell their outcome as response text or token ids instead of
// an accuracy field.
inline std::string planted_reward_log(const std::vector<PlantedStep>& steps, std::size_t group,
                                      std::uint64_t shuffle_seed, std::size_t incomplete_groups = 0) {
  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::string> lines;
  std::size_t sample = 0;
  auto emit_row = [&](std::size_t step, std::vector<int> row) {
    std::shuffle(row.begin(), row.end(), rng);
    const std::string id = "q" + std::to_string(sample++);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::ostringstream line;
      line << "{\"step\":" << step << ",\"sample_id\":\"" << id << "\",\"rollout_id\":" << i << ",";
      switch ((sample + i) % 7) {
        case 0:
          line << "\"truth\":\"5\",\"response_text\":\"<think>work</think> \\\\boxed{" << (row[i] ? "5" : "6")
               << "}\"}";
          break;
        case 1:
          line << "\"truth\":\"2\",\"token_ids\":[0,0,1," << (row[i] ? 5 : 4) << ",2]}";
          break;
        default:
          line << "\"accuracy\":" << row[i] << "}";
      }
      lines.push_back(line.str());
    }
  };
  for (const auto& st : steps) {
    for (std::size_t k = 0; k < st.zero_variance; ++k) emit_row(st.step, std::vector<int>(group, k % 3 == 0 ? 1 : 0));
    for (std::size_t k = 0; k < st.extreme_success; ++k) {
      std::vector<int> row(group, 1);
      row[0] = 0;
      emit_row(st.step, row);
    }
    for (std::size_t k = 0; k < st.extreme_failure; ++k) {
      std::vector<int> row(group, 0);
      row[0] = 1;
      emit_row(st.step, row);
    }
    for (std::size_t k = 0; k < st.other; ++k) {
      std::vector<int> row(group, 0);
      const std::size_t ones = 2 + k % (group - 3);
      for (std::size_t i = 0; i < ones; ++i) row[i] = 1;
      emit_row(st.step, row);
    }
    for (std::size_t k = 0; k < incomplete_groups; ++k) {
      std::vector<int> row(group - 1, 1);
      row[0] = 0;
      emit_row(st.step, row);
    }
  }
  std::shuffle(lines.begin(), lines.end(), rng);
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

// Step-1 column of the reward statistics table in the training report:
// a batch of 512 groups of 8, 323 of them effective.
inline PlantedStep step_one_column() { return {1, 512 - 323, 41, 78, 323 - 41 - 78}; }

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs `binary args` through the shell, capturing both streams.
inline RunResult run(const std::string& binary, const std::string& args, const std::filesystem::path& dir,
                     const std::string& env = "") {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = env + " '" + binary + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

}  // namespace fixtures
