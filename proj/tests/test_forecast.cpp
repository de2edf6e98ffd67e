#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "test_helpers.hpp"
#include "triadda/config.hpp"
#include "triadda/errors.hpp"
#include "triadda/forecast.hpp"
#include "triadda/moments.hpp"
#include "triadda/observation.hpp"
#include "triadda/parallel.hpp"
#include "triadda/truth.hpp"

using namespace triadda;

TEST_SUITE_BEGIN("forecast");

TEST_CASE("h_m hand values") {
  const ModelSpec spec = regime_spec(1);
  SUBCASE("vanishes at the origin without forcing") {
    StatState st{Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero()};
    CHECK(h_m(spec, st).norm() == doctest::Approx(0.0));
  }
  SUBCASE("regime I initial mean") {
    StatState st{Eigen::Vector3d(2.0, 1.6, -2.0), Eigen::Matrix3d::Zero()};
    Eigen::VectorXd v = h_m(spec, st);
    CHECK(v[0] == doctest::Approx(2.0));  // (-0.4 + 1.6 + 4) + 1*1.6*(-2)
  }
  SUBCASE("gamma = 0 reduces to the affine map") {
    ModelSpec lin = spec;
    lin.gamma.assign(27, 0.0);
    lin.F = Eigen::Vector3d(0.3, -0.1, 0.2);
    Xoshiro256pp rng(3, 0);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd u = testing::random_vector(rng, 3, 2.0);
      StatState st{u, Eigen::Matrix3d::Zero()};
      CHECK((h_m(lin, st) - (lin.Lambda * u + lin.F)).norm() <= 1e-14);
    }
  }
}

TEST_CASE("h_v hand values") {
  const ModelSpec spec = regime_spec(1);
  SUBCASE("zero state") {
    ModelSpec quiet = spec;
    quiet.sigma.setZero();
    quiet.Q_sigma.setZero();
    StatState st{Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero()};
    CHECK(h_v(quiet, st).norm() == doctest::Approx(0.0));
  }
  SUBCASE("isotropic decay") {
    ModelSpec lin = spec;
    lin.Lambda = -RowMatrixXd::Identity(3, 3);
    lin.gamma.assign(27, 0.0);
    lin.sigma.setZero();
    lin.Q_sigma.setZero();
    StatState st{Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity()};
    CHECK((h_v(lin, st) + 2.0 * Eigen::Matrix3d::Identity()).norm() <= 1e-14);
  }
}

TEST_CASE("coupled RHS assembly equals the hand-coded triad moment equations") {
  // The Appendix-style oracle with empirical averages; checks the entire
  // mean/covariance feedback assembly including third moments.
  Xoshiro256pp rng(31, 0);
  for (int regime = 1; regime <= 3; ++regime) {
    const TriadParams p = regime_params(regime);
    const ModelSpec spec = build_triad_spec(p);
    for (int trial = 0; trial < 30; ++trial) {
      Eigen::Vector3d u = testing::random_vector(rng, 3, 2.0);
      Eigen::Matrix3d R = testing::random_spd(rng, 3, 1.5);
      RowMatrixXd z = testing::gaussian_ensemble(rng, 97, 3, 1.3);
      const StatState st{u, R};

      // Assembly under test: h + E^N[H] with the empirical measure.
      Eigen::VectorXd mean_rhs = h_m(spec, st);
      Eigen::MatrixXd raw2 = second_moment(z);
      for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int m = 0; m < 3; ++m)
          for (int n = 0; n < 3; ++n) acc += spec.gamma_at(k, m, n) * raw2(m, n);
        mean_rhs[k] += acc;
      }
      Eigen::MatrixXd cov_rhs = h_v(spec, st);
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        cov_rhs += H_v(spec, z.row(i).transpose(), 3) / static_cast<double>(z.rows());

      const testing::TriadRhs oracle =
          testing::triad_moment_rhs(p, u, R, testing::triad_ensemble_moments(z));
      CHECK((mean_rhs - oracle.mean).norm() <= 1e-10);
      CHECK((cov_rhs - oracle.cov).norm() <= 1e-10);
    }
  }
}

TEST_CASE("one forecast step") {
  const ModelSpec spec = regime_spec(1);
  const TriadParams p = regime_params(1);
  StatState st{p.u0_mean, Eigen::Matrix3d(p.r0_var.asDiagonal())};

  SUBCASE("strong relaxation pins R to the sample second moment") {
    ForecastConfig cfg;
    cfg.dt = 1e-3;
    cfg.epsilon_inv = 1000.0;
    cfg.n_samples = 512;
    ParticleRngs rngs(3, cfg.n_samples);
    Xoshiro256pp rng(5, 0);
    EnsembleState ens{0.0, testing::gaussian_ensemble(rng, cfg.n_samples, 3)};
    Eigen::MatrixXd sample_cov = second_moment(ens.samples);
    auto [next, ens2] = step_forecast(spec, st, ens, cfg, rngs);
    CHECK((next.R - sample_cov).norm() / sample_cov.norm() <= 0.1);
  }

  SUBCASE("linear decoupled case follows the Lyapunov RHS") {
    ModelSpec lin = spec;
    lin.gamma.assign(27, 0.0);
    lin.sigma.setZero();
    lin.Q_sigma.setZero();
    ForecastConfig cfg;
    cfg.dt = 1e-3;
    cfg.epsilon_inv = 0.0;
    cfg.n_samples = 64;
    ParticleRngs rngs(3, cfg.n_samples);
    Xoshiro256pp rng(5, 0);
    EnsembleState ens{0.0, testing::gaussian_ensemble(rng, cfg.n_samples, 3)};
    auto [next, ens2] = step_forecast(lin, st, ens, cfg, rngs);
    Eigen::MatrixXd expect =
        st.R + cfg.dt * (lin.Lambda * st.R + st.R * lin.Lambda.transpose());
    CHECK((next.R - Eigen::MatrixXd(expect)).norm() <= 1e-12);
    // Particles follow the linear flow.
    CHECK((ens2.samples - (ens.samples +
                           cfg.dt * (ens.samples * lin.Lambda.transpose())))
              .norm() <= 1e-12);
  }

  SUBCASE("ensemble size mismatch is rejected") {
    ForecastConfig cfg;
    cfg.n_samples = 10;
    ParticleRngs rngs(3, 10);
    EnsembleState ens{0.0, RowMatrixXd::Zero(11, 3)};
    CHECK_THROWS_AS(step_forecast(spec, st, ens, cfg, rngs), ContractError);
  }
}

TEST_CASE("degenerate zero system stays at rest") {
  ModelSpec spec = regime_spec(1);
  spec.gamma.assign(27, 0.0);
  spec.sigma.setZero();
  spec.Q_sigma.setZero();
  StatState init{Eigen::Vector3d(1.0, 0.5, -0.25), Eigen::Matrix3d::Zero()};
  ForecastConfig cfg;
  cfg.n_samples = 16;
  cfg.dt = 1e-3;
  RunOutput run = run_forecast(spec, init, cfg, 0.5, {});
  // u_bar follows the deterministic ODE; particles remain 0, so R stays 0.
  CHECK(run.stats.cov_flat.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  const std::size_t last = run.stats.size() - 1;
  Eigen::Vector3d expect = (Eigen::Matrix3d(spec.Lambda) * 0.5).exp() * init.u_bar;
  CHECK((run.stats.mean_at(last) - expect).norm() <= 1e-2);  // forward Euler bias
}

TEST_CASE("R stays symmetric through a long run") {
  const TriadParams p = regime_params(3);
  const ModelSpec spec = build_triad_spec(p);
  StatState init{p.u0_mean, Eigen::Matrix3d(p.r0_var.asDiagonal())};
  ForecastConfig cfg;
  cfg.n_samples = 64;
  cfg.seed = 9;
  RunOutput run = run_forecast(spec, init, cfg, 1.0, {});
  for (std::size_t i = 0; i < run.stats.size(); i += 100) {
    Eigen::MatrixXd R = run.stats.cov_at(i);
    CHECK((R - R.transpose()).norm() <= 1e-12);
  }
}

TEST_CASE("sample second moment tracks R in the linear-Gaussian case") {
  ModelSpec spec = regime_spec(1);
  spec.gamma.assign(27, 0.0);
  const TriadParams p = regime_params(1);
  StatState init{p.u0_mean, Eigen::Matrix3d(p.r0_var.asDiagonal())};
  ForecastConfig cfg;
  cfg.n_samples = 100000;
  cfg.seed = 41;
  cfg.epsilon_inv = 0.0;
  RunOutput run = run_forecast(spec, init, cfg, 1.0, {1.0});
  REQUIRE(run.snapshots.count(1.0) == 1);
  RowMatrixXd z = run.snapshots.at(1.0);
  z.rowwise() -= run.stats.mean_at(run.stats.size() - 1).transpose();
  Eigen::MatrixXd sample = second_moment(z);
  Eigen::MatrixXd R = run.stats.cov_at(run.stats.size() - 1);
  const double tol = 5.0 * std::sqrt(2.0 / static_cast<double>(cfg.n_samples));
  CHECK((sample - R).norm() / R.norm() <= tol);
}

TEST_CASE("identical seeds reproduce runs across worker counts") {
  const TriadParams p = regime_params(2);
  const ModelSpec spec = build_triad_spec(p);
  StatState init{p.u0_mean, Eigen::Matrix3d(p.r0_var.asDiagonal())};
  ForecastConfig cfg;
  cfg.n_samples = 3000;
  cfg.seed = 123;
  set_num_threads(1);
  RunOutput a = run_forecast(spec, init, cfg, 0.05, {});
  set_num_threads(4);
  RunOutput b = run_forecast(spec, init, cfg, 0.05, {});
  set_num_threads(0);
  CHECK(a.stats.mean == b.stats.mean);
  CHECK(a.stats.cov_flat == b.stats.cov_flat);
}

TEST_SUITE_END();
