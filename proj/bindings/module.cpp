#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "triadda/config.hpp"
#include "triadda/enkf.hpp"
#include "triadda/experiment.hpp"
#include "triadda/filter.hpp"
#include "triadda/forecast.hpp"
#include "triadda/io.hpp"
#include "triadda/metrics.hpp"
#include "triadda/moments.hpp"
#include "triadda/observation.hpp"
#include "triadda/parallel.hpp"
#include "triadda/truth.hpp"

namespace py = pybind11;
using namespace triadda;

namespace {

py::dict stats_to_dict(const StatSeries& s) {
  py::dict out;
  out["times"] = s.times;
  out["mean"] = RowMatrixXd(s.mean);
  out["cov_flat"] = RowMatrixXd(s.cov_flat);
  out["m3"] = s.m3;
  out["dt"] = s.dt;
  return out;
}

py::dict run_to_dict(const RunOutput& run) {
  py::dict out;
  out["method"] = run.method;
  out["stats"] = stats_to_dict(run.stats);
  py::dict snaps;
  for (const auto& [t, samples] : run.snapshots)
    snaps[py::float_(t)] = RowMatrixXd(samples);
  out["snapshots"] = snaps;
  py::list diags;
  for (const UpdateDiagnostics& u : run.diagnostics) {
    py::dict e;
    e["t"] = u.t;
    e["mean_block_rms"] = u.mean_block_rms;
    e["cov_block_rms"] = u.cov_block_rms;
    e["max_abs_state"] = u.max_abs_state;
    diags.append(e);
  }
  out["diagnostics"] = diags;
  return out;
}

FilterConfig make_filter_config(std::int64_t n_samples, double dt, double dt_obs,
                                double t_final, double epsilon_inv,
                                double gamma_m, double gamma_v, bool stabilized,
                                bool stabilize_innovation, int s,
                                std::uint64_t seed,
                                const std::vector<double>& snapshot_times) {
  FilterConfig cfg;
  cfg.n_samples = n_samples;
  cfg.dt = dt;
  cfg.dt_obs = dt_obs;
  cfg.t_final = t_final;
  cfg.epsilon_inv = epsilon_inv;
  cfg.noise = NoiseAmplitudes{gamma_m, gamma_v};
  cfg.stabilized = stabilized;
  cfg.stabilize_innovation = stabilize_innovation;
  cfg.s = s;
  cfg.seed = seed;
  cfg.snapshot_times = snapshot_times;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ensemble statistical data assimilation for quadratic SDE systems";

  py::class_<TriadParams>(m, "TriadParams")
      .def(py::init<>())
      .def_readwrite("B", &TriadParams::B)
      .def_readwrite("lam", &TriadParams::lambda)
      .def_readwrite("d", &TriadParams::damp)
      .def_readwrite("sigma", &TriadParams::sigma)
      .def_property(
          "u0_mean", [](const TriadParams& p) { return Eigen::VectorXd(p.u0_mean); },
          [](TriadParams& p, const Eigen::VectorXd& v) { p.u0_mean = v; })
      .def_property(
          "r0_var", [](const TriadParams& p) { return Eigen::VectorXd(p.r0_var); },
          [](TriadParams& p, const Eigen::VectorXd& v) { p.r0_var = v; });

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_readonly("d", &ModelSpec::d)
      .def_property_readonly(
          "Lambda", [](const ModelSpec& s) { return RowMatrixXd(s.Lambda); })
      .def_property_readonly("F", [](const ModelSpec& s) { return s.F; })
      .def_property_readonly("sigma", [](const ModelSpec& s) { return s.sigma; })
      .def("gamma_at", [](const ModelSpec& s, int k, int mm, int n) {
        return s.gamma_at(k, mm, n);
      })
      .def("validate", [](const ModelSpec& s) { s.validate(); });

  m.def("regime_params", &regime_params, py::arg("regime"));
  m.def("build_triad_spec", &build_triad_spec, py::arg("params"));
  m.def("regime_spec", &regime_spec, py::arg("regime"));
  m.def("default_noise", [](int regime, std::int64_t n) {
    NoiseAmplitudes a = default_noise(regime, n);
    return py::make_tuple(a.gamma_m, a.gamma_v);
  });

  m.def("bilinear_B", &bilinear_B, py::arg("spec"), py::arg("u"), py::arg("v"));
  m.def("mean_coupling_L",
        [](const ModelSpec& s, const Eigen::VectorXd& u) {
          return RowMatrixXd(mean_coupling_L(s, u));
        });
  m.def("lyapunov_exponents", &lyapunov_exponents, py::arg("spec"),
        py::arg("u_bar"));
  m.def("H_m", &H_m, py::arg("spec"), py::arg("z"), py::arg("s") = 3);
  m.def("H_v", &H_v, py::arg("spec"), py::arg("z"), py::arg("s") = 3);
  m.def("grad_H_m", &grad_H_m, py::arg("spec"), py::arg("z"), py::arg("s") = 3);
  m.def("grad_H_v", &grad_H_v, py::arg("spec"), py::arg("z"), py::arg("s") = 3);
  m.def("gain_mean", &gain_mean);
  m.def("gain_cov", &gain_cov);
  m.def("drift_mean", &drift_mean);
  m.def("drift_cov", &drift_cov);

  m.def("empirical_moments", [](const RowMatrixXd& samples) {
    Moments mo = empirical_moments(samples);
    py::dict out;
    out["mean"] = mo.mean;
    out["cov"] = Eigen::MatrixXd(mo.cov);
    out["m3"] = mo.m3;
    out["m3_raw"] = mo.m3_raw;
    out["skew"] = mo.skew;
    out["kurt"] = mo.kurt;
    return out;
  });

  m.def(
      "run_truth",
      [](const ModelSpec& spec, const Eigen::VectorXd& mean,
         const Eigen::VectorXd& var, double dt, double T, std::int64_t n_mc,
         std::uint64_t seed, const std::vector<double>& snapshot_times) {
        TruthSeries truth = run_truth(spec, mean, var, dt, T, n_mc, seed,
                                      snapshot_times);
        py::dict out = stats_to_dict(truth.stats);
        py::dict snaps;
        for (const auto& [t, samples] : truth.snapshots)
          snaps[py::float_(t)] = RowMatrixXd(samples);
        out["snapshots"] = snaps;
        return out;
      },
      py::arg("spec"), py::arg("init_mean"), py::arg("init_var"), py::arg("dt"),
      py::arg("t_final"), py::arg("n_mc"), py::arg("seed"),
      py::arg("snapshot_times") = std::vector<double>{5.0});

  m.def(
      "run_forecast",
      [](const ModelSpec& spec, const Eigen::VectorXd& u0,
         const Eigen::MatrixXd& R0, std::int64_t n_samples, double dt, double T,
         double epsilon_inv, std::uint64_t seed,
         const std::vector<double>& snapshot_times) {
        ForecastConfig cfg;
        cfg.dt = dt;
        cfg.epsilon_inv = epsilon_inv;
        cfg.n_samples = n_samples;
        cfg.seed = seed;
        return run_to_dict(
            run_forecast(spec, StatState{u0, R0}, cfg, T, snapshot_times));
      },
      py::arg("spec"), py::arg("u0"), py::arg("R0"), py::arg("n_samples") = 100,
      py::arg("dt") = 1e-3, py::arg("t_final") = 10.0,
      py::arg("epsilon_inv") = 0.1, py::arg("seed") = 0,
      py::arg("snapshot_times") = std::vector<double>{5.0});

  m.def(
      "make_observations",
      [](const py::dict& truth_stats, double dt_obs, int s) {
        StatSeries stats;
        stats.times = truth_stats["times"].cast<std::vector<double>>();
        stats.mean = truth_stats["mean"].cast<RowMatrixXd>();
        stats.cov_flat = truth_stats["cov_flat"].cast<RowMatrixXd>();
        stats.m3 = truth_stats["m3"].cast<std::vector<double>>();
        stats.dt = truth_stats["dt"].cast<double>();
        ObservationSeries obs = make_observations(stats, dt_obs, s);
        py::dict out;
        out["times"] = obs.times;
        out["d_ubar"] = RowMatrixXd(obs.d_ubar);
        out["d_R_flat"] = RowMatrixXd(obs.d_R_flat);
        out["dt_obs"] = obs.dt_obs;
        out["s"] = obs.s;
        return out;
      },
      py::arg("truth_stats"), py::arg("dt_obs"), py::arg("s") = 3);

  auto parse_obs = [](const py::dict& d) {
    ObservationSeries obs;
    obs.times = d["times"].cast<std::vector<double>>();
    obs.d_ubar = d["d_ubar"].cast<RowMatrixXd>();
    obs.d_R_flat = d["d_R_flat"].cast<RowMatrixXd>();
    obs.dt_obs = d["dt_obs"].cast<double>();
    obs.s = d["s"].cast<int>();
    return obs;
  };

  m.def(
      "run_filter",
      [parse_obs](const ModelSpec& spec, const Eigen::VectorXd& u0,
                  const Eigen::MatrixXd& R0, const py::dict& obs,
                  std::int64_t n_samples, double dt, double dt_obs,
                  double t_final, double epsilon_inv, double gamma_m,
                  double gamma_v, bool stabilized, bool stabilize_innovation,
                  int s, std::uint64_t seed,
                  const std::vector<double>& snapshot_times) {
        FilterConfig cfg = make_filter_config(
            n_samples, dt, dt_obs, t_final, epsilon_inv, gamma_m, gamma_v,
            stabilized, stabilize_innovation, s, seed, snapshot_times);
        return run_to_dict(run_filter(spec, StatState{u0, R0}, parse_obs(obs), cfg));
      },
      py::arg("spec"), py::arg("u0"), py::arg("R0"), py::arg("obs"),
      py::arg("n_samples") = 100, py::arg("dt") = 1e-3, py::arg("dt_obs") = 1e-3,
      py::arg("t_final") = 10.0, py::arg("epsilon_inv") = 0.1,
      py::arg("gamma_m") = 0.3, py::arg("gamma_v") = 2.0,
      py::arg("stabilized") = false, py::arg("stabilize_innovation") = true,
      py::arg("s") = 3, py::arg("seed") = 0,
      py::arg("snapshot_times") = std::vector<double>{5.0});

  m.def(
      "run_enkf",
      [parse_obs](const ModelSpec& spec, const Eigen::VectorXd& u0,
                  const Eigen::MatrixXd& R0, const py::dict& obs,
                  std::int64_t n_samples, double dt, double dt_obs,
                  double t_final, double epsilon_inv, double gamma_m,
                  double gamma_v, int s, std::uint64_t seed,
                  const std::vector<double>& snapshot_times) {
        FilterConfig cfg = make_filter_config(n_samples, dt, dt_obs, t_final,
                                              epsilon_inv, gamma_m, gamma_v,
                                              false, true, s, seed,
                                              snapshot_times);
        return run_to_dict(run_enkf(spec, StatState{u0, R0}, parse_obs(obs), cfg));
      },
      py::arg("spec"), py::arg("u0"), py::arg("R0"), py::arg("obs"),
      py::arg("n_samples") = 100, py::arg("dt") = 1e-3, py::arg("dt_obs") = 1e-3,
      py::arg("t_final") = 10.0, py::arg("epsilon_inv") = 0.1,
      py::arg("gamma_m") = 0.3, py::arg("gamma_v") = 2.0, py::arg("s") = 3,
      py::arg("seed") = 0,
      py::arg("snapshot_times") = std::vector<double>{5.0});

  m.def(
      "calibrate_noise",
      [](const ModelSpec& spec, const Eigen::VectorXd& mean,
         const Eigen::VectorXd& var, std::int64_t n_samples, int n_reps,
         double T, double dt, std::uint64_t seed, double epsilon_inv,
         std::int64_t mc_size) {
        CalibrationResult r = calibrate_noise(spec, mean, var, n_samples,
                                              n_reps, T, dt, seed, epsilon_inv,
                                              nullptr, mc_size);
        py::dict out;
        out["gamma_m"] = r.noise.gamma_m;
        out["gamma_v"] = r.noise.gamma_v;
        out["N"] = r.n_samples;
        out["method"] = "eq35";
        return out;
      },
      py::arg("spec"), py::arg("init_mean"), py::arg("init_var"),
      py::arg("n_samples"), py::arg("n_reps") = 8, py::arg("t_final") = 10.0,
      py::arg("dt") = 1e-3, py::arg("seed") = 0, py::arg("epsilon_inv") = 0.1,
      py::arg("mc_size") = 100000);

  m.def("rmse_series", &rmse_series, py::arg("pred"), py::arg("truth"));
  m.def(
      "relative_entropy",
      [](const RowMatrixXd& truth, const RowMatrixXd& model,
         const std::string& method) {
        RelEntropy r = relative_entropy(
            truth, model,
            method == "histogram" ? RelEntropyMethod::histogram
                                  : RelEntropyMethod::gaussian);
        return py::make_tuple(r.value, r.regularized);
      },
      py::arg("truth_samples"), py::arg("model_samples"),
      py::arg("method") = "gaussian");
  m.def("pearson_correlation", &pearson_correlation);
  m.def("set_num_threads", &set_num_threads);
}
