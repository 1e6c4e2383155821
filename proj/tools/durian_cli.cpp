#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "durian/durian.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_runtime = 3;
constexpr int exit_io = 4;

int exit_code_for(const durian::Error& e) {
  switch (e.kind()) {
    case durian::ErrorKind::invalid_config: return exit_config;
    case durian::ErrorKind::io: return exit_io;
    default: return exit_runtime;
  }
}

const char* output_help = R"(Outputs (train):
  metrics.csv columns: step, objective, mean_reward, mean_accuracy, mean_format,
    mean_length, loss, kl, clip_frac, mean_abs_ratio_dev, max_abs_ratio_dev,
    extreme_ratio, masked_frac, masked_rows, starved, max_abs_adv_grpo,
    max_abs_adv_combined, reason_groups, percep_std_0..2, reason_std_0..b-1
  diag.jsonl: one record per sample per logged step
  extreme_table.csv: reward-pattern counts at steps 1, 10, 20, ...
  entropy_scores.csv: sample_id, entropy
entropy prints: path, P, d, entropy, then "# Q25,<v>" and "# Q75,<v>".
Exit status: 0 ok, 2 config error, 3 runtime error, 4 I/O error.)";

int cmd_train(const std::optional<std::string>& config_file, const std::map<std::string, std::string>& flags,
              bool compare) {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& f : durian::config_fields()) {
    if (auto it = flags.find(f.key); it != flags.end()) overrides.emplace_back(f.key, it->second);
  }
  std::optional<std::filesystem::path> file;
  if (config_file) file = *config_file;
  const auto cfg = durian::resolve_config(file, overrides);
  if (compare) {
    const auto [base, durian_run] = durian::sim::run_comparison(cfg);
    std::cout << "baseline: " << base.output_dir.string() << "\n"
              << "durian:   " << durian_run.output_dir.string() << "\n";
  } else {
    const auto report = durian::sim::run_experiment(cfg);
    const auto& last = report.metrics.back();
    std::cout << "wrote " << report.output_dir.string() << " (" << report.metrics.size()
              << " steps, final mean_accuracy " << durian::fmt6(last.mean_accuracy) << ")\n";
  }
  return exit_ok;
}

int cmd_entropy(const std::vector<std::string>& files) {
  std::vector<double> entropies;
  bool io_failure = false;
  std::cout << "path,P,d,entropy\n";
  for (const auto& path : files) {
    try {
      const auto features = durian::read_feature_matrix(path);
      const double h = durian::feature_entropy(features);
      entropies.push_back(h);
      std::cout << path << ',' << features.rows() << ',' << features.cols() << ',' << durian::fmt6(h) << '\n';
    } catch (const durian::Error& e) {
      io_failure |= e.kind() == durian::ErrorKind::io;
      std::cerr << "warning: skipping " << path << ": " << e.what() << '\n';
    }
  }
  if (entropies.empty()) {
    std::cerr << "error: no feature matrix could be scored\n";
    return io_failure ? exit_io : exit_runtime;
  }
  std::cout << "# Q25," << durian::fmt6(durian::quantile(entropies, 0.25)) << '\n'
            << "# Q75," << durian::fmt6(durian::quantile(entropies, 0.75)) << '\n';
  return exit_ok;
}

int cmd_analyze_rewards(const std::string& log_path, std::size_t rollout) {
  std::ifstream in(log_path);
  if (!in) throw durian::Error(durian::ErrorKind::io, "cannot open " + log_path);
  const auto analysis = durian::analyze_reward_log(in, rollout);
  std::cout << durian::sim::format_extreme_table(analysis.steps, rollout);
  std::cerr << "excluded incomplete groups: " << analysis.excluded_groups << '\n';
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Difficulty-tiered advantage normalization toolkit"};
  app.footer(output_help);
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run a simulated training experiment");
  std::optional<std::string> config_file;
  train->add_option("--config", config_file, "key = value configuration file");
  bool compare = false;
  train->add_flag("--compare", compare, "also run the per-sample normalization baseline");
  std::map<std::string, std::string> flags;
  for (const auto& f : durian::config_fields()) {
    train->add_option_function<std::string>(
        "--" + f.key, [&flags, key = f.key](const std::string& v) { flags[key] = v; }, f.help);
  }

  auto* entropy = app.add_subcommand("entropy", "score feature-matrix files by spectral entropy");
  std::vector<std::string> files;
  entropy->add_option("files", files, "feature-matrix files (text, or binary *.f64)")->required();

  auto* analyze = app.add_subcommand("analyze-rewards", "tabulate extreme reward patterns in a JSONL log");
  std::string log_path;
  std::size_t rollout = 8;
  analyze->add_option("log", log_path, "JSONL reward log")->required();
  analyze->add_option("--rollout", rollout, "responses per sample (G)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*train) return cmd_train(config_file, flags, compare);
    if (*entropy) return cmd_entropy(files);
    if (*analyze) return cmd_analyze_rewards(log_path, rollout);
  } catch (const durian::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_ok;
}
