#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "durian/config.hpp"
#include "durian/difficulty.hpp"
#include "durian/error.hpp"
#include "durian/format.hpp"
#include "durian/sim/extreme_stats.hpp"
#include "durian/sim/trainer.hpp"

namespace durian::sim {

struct ExperimentReport {
  std::filesystem::path output_dir;
  std::vector<StepMetrics> metrics;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  return out;
}

inline void check_written(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

inline std::string metrics_header(const ExperimentConfig& cfg) {
  std::string h =
      "step,objective,mean_reward,mean_accuracy,mean_format,mean_length,loss,kl,clip_frac,"
      "mean_abs_ratio_dev,max_abs_ratio_dev,extreme_ratio,masked_frac,masked_rows,starved,"
      "max_abs_adv_grpo,max_abs_adv_combined,reason_groups";
  for (int a = 0; a < 3; ++a) h += ",percep_std_" + std::to_string(a);
  for (int u = 0; u < cfg.groups_b; ++u) h += ",reason_std_" + std::to_string(u);
  return h + "\n";
}

inline std::string metrics_row(const ExperimentConfig& cfg, const StepMetrics& m) {
  const auto ratio = m.extreme.ratio();
  std::string r = std::to_string(m.step);
  r += cfg.objective == ObjectiveKind::grpo ? ",grpo" : ",dapo";
  for (double v : {m.mean_reward, m.mean_accuracy, m.mean_format, m.mean_length, m.loss, m.kl, m.clip_frac,
                   m.mean_abs_ratio_dev, m.max_abs_ratio_dev})
    r += "," + fmt6(v);
  r += "," + (ratio ? fmt6(*ratio) : std::string("-"));
  r += "," + fmt6(m.masked_frac) + "," + std::to_string(m.masked_rows) + "," + (m.starved ? "1" : "0");
  r += "," + fmt6(m.max_abs_adv_grpo) + "," + fmt6(m.max_abs_adv_combined) + "," + std::to_string(m.reason_groups);
  for (std::size_t a = 0; a < 3; ++a) r += "," + (a < m.percep_std.size() ? fmt6(m.percep_std[a]) : std::string());
  for (std::size_t u = 0; u < static_cast<std::size_t>(cfg.groups_b); ++u)
    r += "," + (u < m.reason_std.size() ? fmt6(m.reason_std[u]) : std::string());
  return r + "\n";
}

inline std::string diag_line(std::size_t step, const SampleDiag& d) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["sample_id"] = d.task_id;
  j["entropy"] = d.entropy;
  j["confidence"] = d.confidence;
  j["percep_group"] = d.percep_label;
  j["reason_group"] = d.reason_label;
  j["masked"] = d.masked;
  j["rewards"] = d.rewards;
  j["accuracy"] = d.accuracy;
  j["advantages"] = {{"grpo", d.adv_grpo},
                     {"perceptual", d.adv_perceptual},
                     {"reasoning", d.adv_reasoning},
                     {"combined", d.adv_combined}};
  return j.dump() + "\n";
}

}  // namespace detail

// Runs cfg.steps training steps and writes, under cfg.output_dir:
//   config.txt          resolved configuration (re-readable with --config)
//   metrics.csv         one row per step
//   diag.jsonl          per-sample records every diag-every steps
//   extreme_table.csv   reward-pattern table at steps 1, 10, 20, ...
//   entropy_scores.csv  cached perceptual difficulty of every pool task
//   summary.txt         final-step metrics and the extreme table
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& dir = cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

  {
    const auto path = dir / "config.txt";
    auto out = detail::open_output(path);
    out << echo_config(cfg);
    detail::check_written(out, path);
  }

  Trainer trainer(cfg);
  {
    const auto path = dir / "entropy_scores.csv";
    auto out = detail::open_output(path);
    std::vector<PerceptualScore> scores;
    for (const auto& t : trainer.dataset()) scores.push_back({t.id, t.entropy});
    write_entropy_csv(out, scores);
    detail::check_written(out, path);
  }

  const auto metrics_path = dir / "metrics.csv";
  const auto diag_path = dir / "diag.jsonl";
  auto metrics = detail::open_output(metrics_path);
  auto diag = detail::open_output(diag_path);
  metrics << detail::metrics_header(cfg);

  ExperimentReport report;
  report.output_dir = dir;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const StepResult res = trainer.step();
    metrics << detail::metrics_row(cfg, res.metrics);
    for (const auto& d : res.samples) diag << detail::diag_line(res.metrics.step, d);
    report.metrics.push_back(res.metrics);
  }
  detail::check_written(metrics, metrics_path);
  detail::check_written(diag, diag_path);

  std::vector<std::pair<std::size_t, ExtremeStats>> columns;
  for (std::size_t step : report_steps(cfg.steps)) columns.emplace_back(step, report.metrics[step - 1].extreme);
  const std::string table = format_extreme_table(columns, cfg.rollout);
  {
    const auto path = dir / "extreme_table.csv";
    auto out = detail::open_output(path);
    out << table;
    detail::check_written(out, path);
  }
  {
    const auto path = dir / "summary.txt";
    auto out = detail::open_output(path);
    const auto& first = report.metrics.front();
    const auto& last = report.metrics.back();
    out << "objective: " << (cfg.objective == ObjectiveKind::grpo ? "grpo" : "dapo") << "\n"
        << "steps: " << cfg.steps << "\n"
        << "alpha: " << fmt6(cfg.alpha.alpha_ori) << "," << fmt6(cfg.alpha.alpha_percep) << ","
        << fmt6(cfg.alpha.alpha_reason) << "\n"
        << "mean_accuracy first/last: " << fmt6(first.mean_accuracy) << " / " << fmt6(last.mean_accuracy) << "\n"
        << "mean_reward first/last: " << fmt6(first.mean_reward) << " / " << fmt6(last.mean_reward) << "\n"
        << "\n"
        << table;
    detail::check_written(out, path);
  }
  return report;
}

// Vanilla GRPO-style normalization (alpha = 1,0,0, no regrouping) against
// the configured difficulty-aware run, written to <output>/baseline and
// <output>/durian.
inline std::pair<ExperimentReport, ExperimentReport> run_comparison(const ExperimentConfig& cfg) {
  ExperimentConfig base = cfg;
  base.alpha = {1.0, 0.0, 0.0};
  base.regroup = false;
  base.output_dir = cfg.output_dir / "baseline";
  ExperimentConfig durian = cfg;
  durian.output_dir = cfg.output_dir / "durian";
  auto a = run_experiment(base);
  auto b = run_experiment(durian);
  return {std::move(a), std::move(b)};
}

}  // namespace durian::sim
