#include "triadda/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "triadda/enkf.hpp"
#include "triadda/errors.hpp"
#include "triadda/filter.hpp"
#include "triadda/forecast.hpp"
#include "triadda/io.hpp"
#include "triadda/metrics.hpp"
#include "triadda/moments.hpp"
#include "triadda/parallel.hpp"
#include "triadda/truth.hpp"

#ifndef TRIADDA_GIT_HASH
#define TRIADDA_GIT_HASH "unknown"
#endif

namespace triadda {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string snapshot_name(const std::string& label, double t) {
  std::ostringstream os;
  os << label << "_t";
  double rounded = std::round(t * 1000.0) / 1000.0;
  os << rounded;
  std::string s = os.str();
  for (char& c : s)
    if (c == '.') c = 'p';
  return s + ".csv";
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

json read_json_if_exists(const fs::path& path) {
  std::ifstream f(path);
  if (!f) return json::object();
  json j;
  f >> j;
  return j;
}

void write_manifest(const ExperimentConfig& cfg) {
  json manifest{{"config", config_to_json(cfg)},
                {"git_hash", TRIADDA_GIT_HASH},
                {"seed", cfg.seed}};
  write_json(manifest, fs::path(cfg.output_dir) / "manifest.json");
}

void write_snapshots(const ExperimentConfig& cfg, const std::string& label,
                     const SnapshotMap& snaps) {
  const fs::path dir = fs::path(cfg.output_dir) / "snapshots";
  fs::create_directories(dir);
  for (const auto& [t, samples] : snaps)
    write_snapshot_csv((dir / snapshot_name(label, t)).string(), samples);
}

SnapshotMap read_snapshots(const ExperimentConfig& cfg, const std::string& label,
                           const std::vector<double>& times) {
  SnapshotMap out;
  const fs::path dir = fs::path(cfg.output_dir) / "snapshots";
  for (double t : times) {
    const fs::path p = dir / snapshot_name(label, t);
    if (fs::exists(p)) out.emplace(t, read_snapshot_csv(p.string()));
  }
  return out;
}

std::string run_id(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "regime" << cfg.regime << "_" << cfg.method << "_N" << cfg.n_samples
     << "_dtobs" << cfg.dt_obs << "_seed" << cfg.seed;
  return os.str();
}

RunOutput dispatch_run(const ExperimentConfig& cfg, const ModelSpec& spec,
                       const ObservationSeries& obs) {
  const TriadParams p = cfg.effective_params();
  StatState init{p.u0_mean, Eigen::MatrixXd(p.r0_var.asDiagonal())};
  if (cfg.method == "none") {
    ForecastConfig fc;
    fc.dt = cfg.dt;
    fc.epsilon_inv = cfg.epsilon_inv;
    fc.n_samples = cfg.n_samples;
    fc.seed = cfg.seed;
    return run_forecast(spec, init, fc, cfg.t_final, cfg.snapshot_times);
  }
  FilterConfig fc;
  fc.n_samples = cfg.n_samples;
  fc.dt = cfg.dt;
  fc.dt_obs = cfg.dt_obs;
  fc.t_final = cfg.t_final;
  fc.epsilon_inv = cfg.epsilon_inv;
  fc.noise = cfg.effective_noise();
  fc.stabilized = cfg.effective_stabilized();
  fc.stabilize_innovation = cfg.stabilize_innovation;
  fc.s = cfg.s;
  fc.seed = cfg.seed;
  fc.snapshot_times = cfg.snapshot_times;
  return cfg.method == "enkf" ? run_enkf(spec, init, obs, fc)
                              : run_filter(spec, init, obs, fc);
}

json metrics_for_run(const ExperimentConfig& cfg, const RunOutput& run,
                     const TruthSeries& truth) {
  json m{{"run_id", run_id(cfg)},
         {"regime", cfg.regime},
         {"N", cfg.n_samples},
         {"dt_obs", cfg.dt_obs},
         {"rmse_mean", rmse_mean(run.stats, truth.stats)},
         {"rmse_var", rmse_variance(run.stats, truth.stats)}};
  // Relative entropy at the first snapshot time present in both runs.
  m["rel_entropy_gauss"] = nullptr;
  m["rel_entropy_hist"] = nullptr;
  for (const auto& [t, model_samples] : run.snapshots) {
    auto it = truth.snapshots.find(t);
    if (it == truth.snapshots.end()) continue;
    RelEntropy g = relative_entropy(it->second, model_samples,
                                    RelEntropyMethod::gaussian);
    RelEntropy h = relative_entropy(it->second, model_samples,
                                    RelEntropyMethod::histogram);
    m["rel_entropy_gauss"] = g.value;
    m["rel_entropy_hist"] = h.value;
    m["rel_entropy_t"] = t;
    if (g.regularized || h.regularized) m["rel_entropy_regularized"] = true;
    break;
  }
  // M3 tracking, on the common grid.
  const std::int64_t stride =
      std::llround(cfg.dt / truth.stats.dt) > 0 ? std::llround(cfg.dt / truth.stats.dt) : 1;
  std::vector<double> m3_truth;
  for (std::size_t i = 0; i < truth.stats.size(); i += static_cast<std::size_t>(stride))
    m3_truth.push_back(truth.stats.m3[i]);
  std::vector<double> m3_run = run.stats.m3;
  if (m3_run.size() == m3_truth.size())
    m["m3_corr"] = pearson_correlation(m3_run, m3_truth);
  else
    m["m3_corr"] = nullptr;
  return m;
}

TruthSeries load_or_run_truth(const ExperimentConfig& cfg, bool write_files) {
  const fs::path dir(cfg.output_dir);
  const fs::path truth_csv = dir / "truth.csv";
  if (fs::exists(truth_csv)) {
    TruthSeries truth;
    truth.stats = read_stat_series_csv(truth_csv.string());
    truth.snapshots = read_snapshots(cfg, "truth", cfg.snapshot_times);
    return truth;
  }
  const TriadParams p = cfg.effective_params();
  const ModelSpec spec = build_triad_spec(p);
  TruthSeries truth =
      run_truth(spec, p.u0_mean, p.r0_var, cfg.dt, cfg.t_final, cfg.mc_size,
                cfg.seed, cfg.snapshot_times);
  if (write_files) {
    fs::create_directories(dir);
    write_stat_series_csv(truth_csv.string(), truth.stats);
    write_snapshots(cfg, "truth", truth.snapshots);
  }
  return truth;
}

}  // namespace

TruthSeries cmd_truth(const ExperimentConfig& cfg, bool write_files) {
  set_num_threads(cfg.threads);
  if (write_files) {
    fs::create_directories(cfg.output_dir);
    write_manifest(cfg);
  }
  return load_or_run_truth(cfg, write_files);
}

RunResult cmd_run(const ExperimentConfig& cfg) {
  set_num_threads(cfg.threads);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_manifest(cfg);

  const ModelSpec spec = build_triad_spec(cfg.effective_params());
  TruthSeries truth = load_or_run_truth(cfg, true);
  ObservationSeries obs = make_observations(truth.stats, cfg.dt_obs, cfg.s);
  write_observations_csv((dir / "obs.csv").string(), obs);

  RunResult result;
  result.run = dispatch_run(cfg, spec, obs);
  write_stat_series_csv((dir / ("run_" + cfg.method + ".csv")).string(),
                        result.run.stats);
  write_snapshots(cfg, cfg.method, result.run.snapshots);

  json diags = json::array();
  for (const UpdateDiagnostics& u : result.run.diagnostics)
    diags.push_back(json{{"t", u.t},
                         {"mean_block_rms", u.mean_block_rms},
                         {"cov_block_rms", u.cov_block_rms},
                         {"max_abs_state", u.max_abs_state}});
  write_json(json{{"method", cfg.method}, {"events", diags}},
             dir / ("diagnostics_" + cfg.method + ".json"));

  result.metrics = metrics_for_run(cfg, result.run, truth);
  json all = read_json_if_exists(dir / "metrics.json");
  all[cfg.method] = result.metrics;
  write_json(all, dir / "metrics.json");
  return result;
}

json cmd_calibrate(const ExperimentConfig& cfg,
                   const std::vector<std::int64_t>& n_list) {
  set_num_threads(cfg.threads);
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_manifest(cfg);

  const TriadParams p = cfg.effective_params();
  const ModelSpec spec = build_triad_spec(p);
  TruthSeries truth = load_or_run_truth(cfg, true);

  std::vector<std::int64_t> sizes = n_list;
  if (sizes.empty()) sizes.push_back(cfg.n_samples);
  const int n_reps = 8;

  json entries = json::array();
  for (std::int64_t n : sizes) {
    CalibrationResult r = calibrate_noise(
        spec, p.u0_mean, p.r0_var, n, n_reps, cfg.t_final, cfg.dt, cfg.seed,
        cfg.epsilon_inv, &truth.stats, cfg.mc_size);
    entries.push_back(json{{"gamma_m", r.noise.gamma_m},
                           {"gamma_v", r.noise.gamma_v},
                           {"N", r.n_samples},
                           {"method", "eq35"},
                           {"n_reps", r.n_reps},
                           {"skip_fraction", r.skip_fraction}});
  }

  json artifact;
  if (entries.size() == 1) {
    artifact = entries[0];
  } else {
    // Log-log slope of the amplitudes against N.
    auto fit_slope = [&](const char* key) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double n = static_cast<double>(entries.size());
      for (const json& e : entries) {
        const double x = std::log(e.at("N").get<double>());
        const double y = std::log(e.at(key).get<double>());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    artifact = json{{"entries", entries},
                    {"slope_gamma_m", fit_slope("gamma_m")},
                    {"slope_gamma_v", fit_slope("gamma_v")},
                    {"method", "eq35"}};
  }
  write_json(artifact, dir / "calibration.json");
  return artifact;
}

json cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
               const std::vector<double>& values) {
  set_num_threads(cfg.threads);
  if (axis != "N" && axis != "dt_obs")
    throw ConfigError("sweep axis must be N or dt_obs");
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_manifest(cfg);

  json rows = json::array();
  for (double v : values) {
    ExperimentConfig point = cfg;
    std::ostringstream sub;
    sub << "sweep_" << axis << "_" << v;
    point.output_dir = (dir / sub.str()).string();
    if (axis == "N")
      point.n_samples = static_cast<std::int64_t>(std::llround(v));
    else
      point.dt_obs = v;
    RunResult r = cmd_run(point);
    json row = r.metrics;
    row["axis"] = axis;
    row["value"] = v;
    rows.push_back(row);
  }

  std::ofstream f(dir / ("sweep_" + axis + ".csv"));
  if (!f) throw ConfigError("cannot write sweep table");
  f << "axis,value,rmse_mean,rmse_var,rel_entropy_gauss,m3_corr\n";
  for (const json& row : rows) {
    auto num = [&](const char* key) {
      return row.contains(key) && !row.at(key).is_null()
                 ? format_double(row.at(key).get<double>())
                 : std::string("nan");
    };
    f << axis << ',' << format_double(row.at("value").get<double>()) << ','
      << num("rmse_mean") << ',' << num("rmse_var") << ','
      << num("rel_entropy_gauss") << ',' << num("m3_corr") << '\n';
  }
  return rows;
}

json cmd_metrics(const ExperimentConfig& cfg) {
  set_num_threads(cfg.threads);
  const fs::path dir(cfg.output_dir);
  TruthSeries truth;
  truth.stats = read_stat_series_csv((dir / "truth.csv").string());
  truth.snapshots = read_snapshots(cfg, "truth", cfg.snapshot_times);
  RunOutput run;
  run.method = cfg.method;
  run.stats = read_stat_series_csv((dir / ("run_" + cfg.method + ".csv")).string());
  run.snapshots = read_snapshots(cfg, cfg.method, cfg.snapshot_times);
  json m = metrics_for_run(cfg, run, truth);
  json all = read_json_if_exists(dir / "metrics.json");
  all[cfg.method] = m;
  write_json(all, dir / "metrics.json");
  return m;
}

}  // namespace triadda
