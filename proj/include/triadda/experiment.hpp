#pragma once

#include <nlohmann/json.hpp>

#include "triadda/config.hpp"
#include "triadda/series.hpp"

namespace triadda {

// Orchestration behind the CLI subcommands.  Every command writes into
// cfg.output_dir:
//   truth.csv, obs.csv, run_<method>.csv, snapshots/, metrics.json,
//   diagnostics_<method>.json, calibration.json, manifest.json

// Run (or load, when the files already exist) the Monte-Carlo truth.
TruthSeries cmd_truth(const ExperimentConfig& cfg, bool write_files = true);

struct RunResult {
  RunOutput run;
  nlohmann::json metrics;
};

// Observation generation, one assimilation (or plain forecast) run and its
// metrics against the truth.
RunResult cmd_run(const ExperimentConfig& cfg);

// Observation-noise calibration at cfg.n_samples (or each size in n_list).
// Returns the JSON artifact that was written.
nlohmann::json cmd_calibrate(const ExperimentConfig& cfg,
                             const std::vector<std::int64_t>& n_list = {});

// Sweep cfg.method over an axis ("N" or "dt_obs"), sharing one truth run;
// writes sweep_<axis>.csv and returns it as JSON rows.
nlohmann::json cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                         const std::vector<double>& values);

// Recompute metrics from files already present in cfg.output_dir.
nlohmann::json cmd_metrics(const ExperimentConfig& cfg);

}  // namespace triadda
