#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "triadda/config.hpp"
#include "triadda/enkf.hpp"
#include "triadda/errors.hpp"
#include "triadda/observation.hpp"
#include "triadda/parallel.hpp"
#include "triadda/truth.hpp"

using namespace triadda;

TEST_SUITE_BEGIN("enkf");

TEST_CASE("degenerate gains vanish") {
  SUBCASE("identical particles") {
    RowMatrixXd z = RowMatrixXd::Constant(16, 3, 1.5);
    Eigen::MatrixXd h = Eigen::MatrixXd::Constant(16, 2, 0.7);
    CHECK(enkf_gain(z, h, 1.0).norm() == doctest::Approx(0.0));
  }
  SUBCASE("symmetric quadratic observation") {
    RowMatrixXd z(2, 3);
    z << 1, 0, 0, -1, 0, 0;
    Eigen::MatrixXd h(2, 1);
    h << 1.0, 1.0;  // H = z1^2 is even
    CHECK(enkf_gain(z, h, 1.0).norm() == doctest::Approx(0.0));
  }
  SUBCASE("single particle rejected") {
    RowMatrixXd z(1, 3);
    z << 1, 2, 3;
    Eigen::MatrixXd h(1, 1);
    h << 1.0;
    CHECK_THROWS_AS(enkf_gain(z, h, 1.0), ContractError);
  }
}

TEST_CASE("gain matches the Gaussian third-moment formula") {
  // For z ~ N(mu, S) and quadratic H: E[z (H - E H)^T]_ik
  //   = sum_pq gamma_kpq (mu_p S_iq + mu_q S_ip)  (Isserlis).
  const ModelSpec spec = regime_spec(1);
  Xoshiro256pp rng(61, 0);
  const std::int64_t n = 100000;
  Eigen::Vector3d mu(1.0, 2.0, -1.0);
  Eigen::Matrix3d S = testing::random_spd(rng, 3, 1.0);
  Eigen::LLT<Eigen::Matrix3d> llt(S);
  RowMatrixXd z = testing::gaussian_ensemble(rng, n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    z.row(i) = (mu + llt.matrixL() * z.row(i).transpose()).transpose();

  Eigen::MatrixXd h_vals(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    h_vals.row(i) = H_m(spec, z.row(i).transpose(), 3).transpose();

  Eigen::MatrixXd expect(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          acc += spec.gamma_at(k, p, q) * (mu[p] * S(i, q) + mu[q] * S(i, p));
      expect(i, k) = acc;
    }
  Eigen::MatrixXd gain = enkf_gain(z, h_vals, 1.0);
  CHECK((gain - expect).norm() / expect.norm() <= 0.05);
}

TEST_CASE("linear observation reduces to the standard cross-covariance") {
  // Extension check (not a paper claim): with a synthetic linear H(z) = z the
  // EnKF gain approaches S Gamma^-2 for a Gaussian ensemble.
  Xoshiro256pp rng(67, 0);
  const std::int64_t n = 200000;
  Eigen::Matrix3d S = testing::random_spd(rng, 3, 1.0);
  Eigen::LLT<Eigen::Matrix3d> llt(S);
  RowMatrixXd z = testing::gaussian_ensemble(rng, n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    z.row(i) = (llt.matrixL() * z.row(i).transpose()).transpose();
  Eigen::MatrixXd h_vals = z;
  Eigen::MatrixXd gain = enkf_gain(z, h_vals, 2.0);
  CHECK((gain - S / 4.0).norm() / (S.norm() / 4.0) <= 0.05);
}

TEST_CASE("run_enkf end to end") {
  const TriadParams p = regime_params(1);
  const ModelSpec spec = build_triad_spec(p);
  TruthSeries truth =
      run_truth(spec, p.u0_mean, p.r0_var, 1e-3, 0.3, 4000, 71, {});
  ObservationSeries obs = make_observations(truth.stats, 1e-3, 3);
  FilterConfig cfg;
  cfg.n_samples = 50;
  cfg.t_final = 0.3;
  cfg.noise = default_noise(1, cfg.n_samples);
  cfg.seed = 8;
  StatState init{p.u0_mean, Eigen::MatrixXd(p.r0_var.asDiagonal())};

  SUBCASE("labels and diagnostics") {
    RunOutput run = run_enkf(spec, init, obs, cfg);
    CHECK(run.method == "enkf");
    CHECK(run.diagnostics.size() == 300);
    CHECK(run.stats.size() == 301);
  }
  SUBCASE("zero-innovation degenerate case leaves particles unchanged") {
    ModelSpec quiet = spec;
    quiet.gamma.assign(27, 0.0);
    quiet.sigma.setZero();
    quiet.Q_sigma.setZero();
    Eigen::Vector3d mean(0.5, 0.5, 0.5);
    TruthSeries flat =
        run_truth(quiet, mean, Eigen::Vector3d::Zero(), 1e-3, 0.1, 200, 3, {});
    ObservationSeries fobs = make_observations(flat.stats, 1e-3, 3);
    FilterConfig c2 = cfg;
    c2.t_final = 0.1;
    StatState init2{mean, Eigen::Matrix3d::Zero()};
    RunOutput run = run_enkf(quiet, init2, fobs, c2);
    for (const UpdateDiagnostics& u : run.diagnostics) {
      CHECK(u.mean_block_rms <= 1e-12);
      CHECK(u.cov_block_rms <= 1e-12);
    }
  }
  SUBCASE("reproducible across worker counts") {
    set_num_threads(1);
    RunOutput a = run_enkf(spec, init, obs, cfg);
    set_num_threads(4);
    RunOutput b = run_enkf(spec, init, obs, cfg);
    set_num_threads(0);
    CHECK(a.stats.mean == b.stats.mean);
    CHECK(a.stats.cov_flat == b.stats.cov_flat);
  }
}

TEST_SUITE_END();
