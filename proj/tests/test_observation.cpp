#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "triadda/config.hpp"
#include "triadda/errors.hpp"
#include "triadda/observation.hpp"
#include "triadda/truth.hpp"

using namespace triadda;

TEST_SUITE_BEGIN("observation");

TEST_CASE("H_m hand values") {
  const ModelSpec spec = regime_spec(1);
  CHECK(H_m(spec, Eigen::Vector3d::Zero(), 3).norm() == doctest::Approx(0.0));
  Eigen::VectorXd h = H_m(spec, Eigen::Vector3d::Ones(), 3);
  CHECK(h[0] == doctest::Approx(1.0));
  CHECK(h[1] == doctest::Approx(-0.6));
  CHECK(h[2] == doctest::Approx(-0.4));
}

TEST_CASE("H_v hand values") {
  const ModelSpec spec = regime_spec(1);
  CHECK(H_v(spec, Eigen::Vector3d::Zero(), 3).norm() == doctest::Approx(0.0));
  Eigen::MatrixXd hv = H_v(spec, Eigen::Vector3d::Ones(), 3);
  // At the all-ones state H^v_{kl} = B_k + B_l.
  CHECK(hv(0, 0) == doctest::Approx(2.0));
  CHECK(hv(0, 1) == doctest::Approx(0.4));
  CHECK(hv(1, 2) == doctest::Approx(-1.0));
  CHECK((hv - hv.transpose()).norm() == doctest::Approx(0.0));
}

TEST_CASE("homogeneity degrees 2 and 3") {
  Xoshiro256pp rng(21, 0);
  for (int regime = 1; regime <= 3; ++regime) {
    const ModelSpec spec = regime_spec(regime);
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd z = testing::random_vector(rng, 3, 3.0);
      const double a = 4.0 * rng.uniform() - 2.0;
      CHECK((H_m(spec, a * z, 3) - a * a * H_m(spec, z, 3)).norm() <=
            1e-12 * (1.0 + H_m(spec, z, 3).norm() * a * a));
      CHECK((H_v(spec, a * z, 3) - a * a * a * H_v(spec, z, 3)).norm() <=
            1e-12 * (1.0 + H_v(spec, z, 3).norm() * std::abs(a * a * a)));
    }
  }
}

TEST_CASE("Euler homogeneity identities for the gradients") {
  Xoshiro256pp rng(23, 0);
  const ModelSpec spec = regime_spec(1);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd z = testing::random_vector(rng, 3, 4.0);
    const double zn = z.norm();
    Eigen::VectorXd hm = H_m(spec, z, 3);
    Eigen::MatrixXd dm = grad_H_m(spec, z, 3);  // s x d
    CHECK((dm * z - 2.0 * hm).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + zn * zn));
    Eigen::VectorXd hv = flatten_rowmajor(H_v(spec, z, 3));
    Eigen::MatrixXd dv = grad_H_v(spec, z, 3);  // s^2 x d
    CHECK((dv * z - 3.0 * hv).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + zn * zn * zn));
  }
  // Gradients vanish at the origin.
  CHECK(grad_H_m(spec, Eigen::Vector3d::Zero(), 3).norm() == doctest::Approx(0.0));
  CHECK(grad_H_v(spec, Eigen::Vector3d::Zero(), 3).norm() == doctest::Approx(0.0));
}

TEST_CASE("analytic gradients match central differences") {
  Xoshiro256pp rng(29, 0);
  const ModelSpec spec = regime_spec(2);
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd z = testing::random_vector(rng, 3, 2.0);
    Eigen::MatrixXd dm = grad_H_m(spec, z, 3);
    Eigen::MatrixXd dv = grad_H_v(spec, z, 3);
    for (int j = 0; j < 3; ++j) {
      Eigen::VectorXd zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      Eigen::VectorXd fd_m = (H_m(spec, zp, 3) - H_m(spec, zm, 3)) / (2.0 * h);
      CHECK((dm.col(j) - fd_m).norm() <= 1e-7 * (1.0 + fd_m.norm()));
      Eigen::VectorXd fd_v = (flatten_rowmajor(H_v(spec, zp, 3)) -
                              flatten_rowmajor(H_v(spec, zm, 3))) /
                             (2.0 * h);
      CHECK((dv.col(j) - fd_v).norm() <= 1e-7 * (1.0 + fd_v.norm()));
    }
  }
}

TEST_CASE("ensemble H_m average equals the triad feedback terms") {
  Xoshiro256pp rng(31, 0);
  const TriadParams p = regime_params(1);
  const ModelSpec spec = build_triad_spec(p);
  RowMatrixXd z = testing::gaussian_ensemble(rng, 300, 3, 1.7);
  Eigen::Vector3d avg = Eigen::Vector3d::Zero();
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    avg += H_m(spec, z.row(i).transpose(), 3);
  avg /= static_cast<double>(z.rows());
  const testing::TriadEnsembleMoments e = testing::triad_ensemble_moments(z);
  CHECK(std::abs(avg[0] - p.B[0] * e.c1) <= 1e-12 * (1.0 + std::abs(avg[0])));
  CHECK(std::abs(avg[1] - p.B[1] * e.c2) <= 1e-12 * (1.0 + std::abs(avg[1])));
  CHECK(std::abs(avg[2] - p.B[2] * e.c3) <= 1e-12 * (1.0 + std::abs(avg[2])));
}

TEST_CASE("make_observations") {
  const ModelSpec spec = regime_spec(1);
  const TriadParams p = regime_params(1);
  TruthSeries truth = run_truth(spec, p.u0_mean, p.r0_var, 1e-3, 0.2, 500, 3, {});

  SUBCASE("telescoping at dt_obs = dt") {
    ObservationSeries obs = make_observations(truth.stats, 1e-3, 3);
    CHECK(obs.size() == 200);
    Eigen::Vector3d total = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < obs.size(); ++j) total += obs.d_ubar_at(j);
    Eigen::Vector3d expect =
        truth.stats.mean_at(truth.stats.size() - 1) - truth.stats.mean_at(0);
    CHECK((total - expect).norm() <= 1e-12);
  }
  SUBCASE("event counting at dt_obs = 0.05") {
    ObservationSeries obs = make_observations(truth.stats, 0.05, 3);
    CHECK(obs.size() == 4);  // 0.2 / 0.05
    CHECK(obs.times.front() == doctest::Approx(0.05));
    CHECK(obs.times.back() == doctest::Approx(0.2));
  }
  SUBCASE("constant series produces zero increments") {
    StatSeries flat = truth.stats;
    for (Eigen::Index i = 0; i < flat.mean.rows(); ++i) {
      flat.mean.row(i) = truth.stats.mean.row(0);
      flat.cov_flat.row(i) = truth.stats.cov_flat.row(0);
    }
    ObservationSeries obs = make_observations(flat, 0.01, 3);
    CHECK(obs.d_ubar.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(obs.d_R_flat.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("misaligned dt_obs is rejected") {
    CHECK_THROWS_AS(make_observations(truth.stats, 0.0015, 3), ConfigError);
  }
}

TEST_CASE("calibration of a fully deterministic system returns zero noise") {
  // Constant drift keeps RK4 and forward Euler identical, so the only error
  // source left is sampling noise, and there is none.
  ModelSpec spec = regime_spec(1);
  spec.gamma.assign(27, 0.0);
  spec.sigma.setZero();
  spec.Q_sigma.setZero();
  spec.Lambda.setZero();
  spec.F = Eigen::Vector3d(0.3, -0.1, 0.2);
  Eigen::Vector3d mean(1.0, -0.5, 0.25), var(0.0, 0.0, 0.0);
  TruthSeries truth = run_truth(spec, mean, var, 1e-3, 0.5, 200, 3, {});
  CalibrationResult r = calibrate_noise(spec, mean, var, 50, 4, 0.5, 1e-3, 3,
                                        0.0, &truth.stats);
  CHECK(r.noise.gamma_m <= 1e-8);
  CHECK(r.noise.gamma_v <= 1e-8);
}

TEST_CASE("calibration preconditions") {
  const ModelSpec spec = regime_spec(1);
  Eigen::Vector3d mean(0, 0, 0), var(1, 1, 1);
  CHECK_THROWS_AS(
      calibrate_noise(spec, mean, var, 50, 3, 1.0, 1e-3, 1, 0.1, nullptr, 1000),
      ContractError);
}

TEST_CASE("regime I calibration returns positive finite amplitudes") {
  const TriadParams p = regime_params(1);
  const ModelSpec spec = build_triad_spec(p);
  TruthSeries truth =
      run_truth(spec, p.u0_mean, p.r0_var, 1e-3, 1.0, 20000, 11, {});
  CalibrationResult r = calibrate_noise(spec, p.u0_mean, p.r0_var, 100, 4, 1.0,
                                        1e-3, 11, 0.1, &truth.stats);
  CHECK(r.noise.gamma_m > 0.0);
  CHECK(r.noise.gamma_v > 0.0);
  CHECK(std::isfinite(r.noise.gamma_m));
  CHECK(std::isfinite(r.noise.gamma_v));
}

TEST_SUITE_END();
