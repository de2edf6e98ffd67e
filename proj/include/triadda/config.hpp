#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "triadda/model.hpp"
#include "triadda/observation.hpp"

namespace triadda {

// Full experiment description; defaults follow the reference setup
// (dt = 1e-3, T = 10, MC = 1e5, epsilon_inv = 0.1, N = 100).
struct ExperimentConfig {
  int regime = 1;                     // 1 | 2 | 3 preset, unless params is set
  std::optional<TriadParams> params;  // inline parameter override
  std::int64_t n_samples = 100;
  double dt = 1e-3;
  double dt_obs = 1e-3;
  double t_final = 10.0;
  double epsilon_inv = 0.1;
  std::int64_t mc_size = 100000;
  std::uint64_t seed = 1;
  std::string method = "highorder";  // highorder | enkf | none
  std::optional<bool> stabilized;    // default: on in regime III only
  bool stabilize_innovation = true;
  int s = 3;
  std::string output_dir = "out";
  std::optional<NoiseAmplitudes> noise;  // default: calibrated preset scaled to N
  std::vector<double> snapshot_times = {5.0};
  int threads = 0;

  bool effective_stabilized() const {
    return stabilized.value_or(regime == 3 && !params.has_value());
  }
  TriadParams effective_params() const;
  NoiseAmplitudes effective_noise() const;
};

// Table parameters of the three test regimes.
TriadParams regime_params(int regime);
ModelSpec regime_spec(int regime);

// Observation-noise amplitudes for an ensemble of size n: amplitudes
// calibrated once at the reference size N = 100 via the mean-square error
// growth estimate, scaled by the N^(-1/2) sampling law.
NoiseAmplitudes default_noise(int regime, std::int64_t n_samples);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

}  // namespace triadda
