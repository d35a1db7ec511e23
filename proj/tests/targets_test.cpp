#include <gtest/gtest.h>

#include <cmath>

#include "twinforge/simulate.hpp"
#include "twinforge/targets.hpp"

using namespace twinforge;

namespace {

LibrarySpec constant_and_linear(int m) {
  LibrarySpec s;
  s.families = {Family::constant, Family::multinomial};
  s.max_degree = 1;
  s.state_dim = m;
  return s;
}

LibrarySpec constant_only(int m) {
  auto s = constant_and_linear(m);
  s.exclude.clear();
  for (int i = 1; i <= m; ++i) s.exclude.push_back("X" + std::to_string(i));
  return s;
}

// Least squares with a complete orthogonal decomposition.
Eigen::VectorXd ols(const RegressionProblem& p) {
  return p.L.values.completeOrthogonalDecomposition().solve(p.Y);
}

}  // namespace

TEST(Differentiate, SineInteriorAccuracy) {
  const double dt = 1e-3;
  const int n = 2001;
  Eigen::VectorXd x(n), dx(n);
  for (int k = 0; k < n; ++k) {
    x[k] = std::sin(3.0 * k * dt);
    dx[k] = 3.0 * std::cos(3.0 * k * dt);
  }
  const Eigen::VectorXd d = differentiate(x, dt);
  EXPECT_LT((d - dx).segment(2, n - 4).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((d - dx).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Differentiate, QuarticIsExactEverywhere) {
  const double dt = 0.1;
  const int n = 12;
  Eigen::MatrixXd x(n, 2), dx(n, 2);
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    x(k, 0) = t * t * t * t;
    dx(k, 0) = 4.0 * t * t * t;
    x(k, 1) = 2.0 - t + 0.5 * t * t;
    dx(k, 1) = -1.0 + t;
  }
  EXPECT_LT((differentiate(x, dt) - dx).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Differentiate, Errors) {
  EXPECT_THROW(differentiate(Eigen::VectorXd(Eigen::VectorXd::Zero(4)), 0.1), DataError);
  EXPECT_THROW(differentiate(Eigen::VectorXd(Eigen::VectorXd::Zero(8)), 0.0), DataError);
}

TEST(Smoothing, HannWindowNormalizedAndSymmetric) {
  for (int w : {2, 5, 20}) {
    const auto h = hann_window(w);
    EXPECT_NEAR(h.sum(), 1.0, 1e-14);
    for (int q = 0; q < w; ++q) EXPECT_NEAR(h[q], h[w - 1 - q], 1e-15);
    EXPECT_GT(h.minCoeff(), 0.0);
  }
}

TEST(Smoothing, PreservesAffineSignalsAndShapes) {
  Eigen::MatrixXd a(100, 2);
  for (int k = 0; k < 100; ++k) a.row(k) << 3.0, 1.0 + 0.5 * k;
  const Eigen::MatrixXd s = smooth_rows(a, 9, 4);
  EXPECT_EQ(s.rows(), (100 - 9 + 1 + 3) / 4);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    EXPECT_NEAR(s(r, 0), 3.0, 1e-12);
    EXPECT_NEAR(s(r, 1), 1.0 + 0.5 * (4 * r + 4), 1e-10);
  }
  EXPECT_EQ(smooth_rows(a, 1, 1), a);
  EXPECT_THROW(smooth_rows(a, 200, 1), DataError);
}

TEST(Smoothing, CommutesWithLinearCombination) {
  Rng rng(1);
  Eigen::MatrixXd L(80, 3);
  for (int r = 0; r < 80; ++r)
    for (int c = 0; c < 3; ++c) L(r, c) = rng.normal();
  const Eigen::Vector3d theta(1.5, -2.0, 0.25);
  const Eigen::VectorXd y = L * theta;
  const Eigen::MatrixXd sy = smooth_rows(Eigen::MatrixXd(y), 7, 3);
  EXPECT_LT((sy.col(0) - smooth_rows(L, 7, 3) * theta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dataset, ValidateRejectsBadSampling) {
  Dataset d;
  d.dt = 0.1;
  d.t = Eigen::VectorXd::LinSpaced(5, 0.0, 0.4);
  d.realizations.push_back({Eigen::MatrixXd::Zero(5, 1), Eigen::MatrixXd(5, 0)});
  EXPECT_NO_THROW(d.validate());
  d.t[3] += 0.01;
  EXPECT_THROW(d.validate(), DataError);
  d.t = Eigen::VectorXd::LinSpaced(5, 0.0, 0.4);
  d.realizations[0].states(2, 0) = NAN;
  EXPECT_THROW(d.validate(), DataError);
}

TEST(FrameworkOne, ResidualRecoversInputGain) {
  // Linear oscillator with mass 2: the residual of the velocity equation is u/2.
  const auto sys = linear_oscillator(2.0, 1.0, 50.0, 1.0);
  const int n = 2000;
  Eigen::MatrixXd u(n, 1);
  for (int k = 0; k < n; ++k) u(k, 0) = std::sin(7.0 * k * 1e-3) + 0.5 * std::cos(23.0 * k * 1e-3);
  const Dataset data = rk4_simulate_with_input(sys, u, 1e-3);
  LibrarySpec spec = constant_and_linear(2);
  spec.include_input = true;
  spec.input_dim = 1;
  const auto p = build_f1(data, sys.nominal, spec, 1);
  EXPECT_EQ(p.Y.size(), n - 4);
  EXPECT_EQ(p.L.column_labels, (std::vector<std::string>{"1", "X1", "X2", "u1"}));
  const Eigen::VectorXd th = ols(p);
  // The input is held over each step, so the match is first order in dt.
  EXPECT_NEAR(th[3], 0.5, 2e-3);
  EXPECT_NEAR(th[1], 0.0, 0.2);
  EXPECT_GT(p.signal_variance, 0.0);
}

TEST(FrameworkOne, SmoothingKeepsRowsAligned) {
  const auto sys = linear_oscillator(1.0, 1.0, 50.0, 1.0);
  const Dataset data = rk4_simulate(sys, 1.0, 1e-3, 4);
  LibrarySpec spec = constant_and_linear(2);
  spec.include_input = true;
  spec.input_dim = 1;
  TargetOptions opt;
  opt.smooth_window = 20;
  opt.smooth_stride = 10;
  const auto p = build_f1(data, sys.nominal, spec, 1, opt);
  EXPECT_EQ(p.Y.size(), (996 - 20 + 1 + 9) / 10);
  EXPECT_NEAR(ols(p)[3], 1.0, 0.02);
}

TEST(FrameworkTwo, OrnsteinUhlenbeckDriftAndDiffusion) {
  const auto sys = ornstein_uhlenbeck(2.0, 0.5, 1.0);
  const Dataset data = em_simulate(sys, 1.0, 1e-3, 100, 42);
  const auto drift = build_f2_drift(data, sys.nominal, constant_and_linear(1), 0);
  EXPECT_EQ(drift.Y.size(), 100 * 999);
  const Eigen::VectorXd th = ols(drift);
  EXPECT_NEAR(th[1], -2.0, 0.3);
  EXPECT_NEAR(th[0], 0.0, 0.15);

  const auto diff = build_f2_diffusion(data, sys.nominal, constant_only(1), 0, 0);
  EXPECT_NEAR(diff.Y.mean(), 0.25, 0.25 * 0.03);
}

TEST(FrameworkTwo, BrownianMotionQuadraticVariation) {
  const auto sys = ornstein_uhlenbeck(0.0, 0.5);
  const Dataset data = em_simulate(sys, 1.0, 1e-3, 50, 3);
  for (int block : {1, 5}) {
    TargetOptions opt;
    opt.covariation_block = block;
    const auto p = build_f2_diffusion(data, sys.nominal, constant_only(1), 0, 0, opt);
    EXPECT_EQ(p.Y.size(), 50 * (999 / block));
    EXPECT_NEAR(p.Y.mean(), 0.25, 0.25 * 0.05) << block;
  }
}

TEST(FrameworkTwo, NoiseCorrectionRemovesMeasurementNoise) {
  const auto sys = ornstein_uhlenbeck(0.0, 0.5);
  const Dataset clean = em_simulate(sys, 1.0, 1e-3, 100, 5);
  // Fixed absolute noise: 0.005 per sample, i.e. 2 s^2 / dt = 0.05 of bias.
  Dataset noisy = clean;
  Rng rng(6);
  for (auto& r : noisy.realizations)
    for (Eigen::Index k = 0; k < r.states.rows(); ++k) r.states(k, 0) += 0.005 * rng.normal();
  TargetOptions raw, fixed;
  fixed.noise_corrected = true;
  const double biased = build_f2_diffusion(noisy, sys.nominal, constant_only(1), 0, 0, raw).Y.mean();
  const double corrected = build_f2_diffusion(noisy, sys.nominal, constant_only(1), 0, 0, fixed).Y.mean();
  EXPECT_NEAR(biased, 0.30, 0.02);
  EXPECT_NEAR(corrected, 0.25, 0.02);
}

TEST(FrameworkTwo, ExtraDriftIsRemoved) {
  const auto sys = ornstein_uhlenbeck(5.0, 0.3, 2.0);
  const Dataset data = em_simulate(sys, 1.0, 1e-3, 20, 8);
  const DriftFunction truth = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, -5.0 * x[0]); };
  const auto p = build_f2_diffusion(data, sys.nominal, constant_and_linear(1), 0, 0, {}, &truth);
  // Residual increments are pure noise: no dependence on the state remains.
  const Eigen::VectorXd th = ols(p);
  EXPECT_NEAR(th[0], 0.09, 0.01);
  EXPECT_NEAR(th[1], 0.0, 0.01);
}

TEST(FrameworkTwo, RejectsCoarseSampling) {
  const auto sys = ornstein_uhlenbeck(1.0, 0.5);
  const Dataset data = em_simulate(sys, 1.0, 1e-2, 2, 1);
  EXPECT_THROW(build_f2_drift(data, sys.nominal, constant_and_linear(1), 0), DataError);
  TargetOptions loose;
  loose.max_dt = 0.05;
  EXPECT_NO_THROW(build_f2_drift(data, sys.nominal, constant_and_linear(1), 0, loose));
  TargetOptions bad = loose;
  bad.covariation_block = 0;
  EXPECT_THROW(build_f2_diffusion(data, sys.nominal, constant_only(1), 0, 0, bad), ConfigError);
}

TEST(FrameworkTwo, EnsembleAveragingCollapsesRealizations) {
  const auto sys = ornstein_uhlenbeck(1.0, 0.5, 1.0);
  const Dataset data = em_simulate(sys, 0.1, 1e-3, 10, 2);
  TargetOptions opt;
  opt.ensemble_average = true;
  const auto p = build_f2_drift(data, sys.nominal, constant_and_linear(1), 0, opt);
  EXPECT_EQ(p.Y.size(), 99);
  double want = 0.0;
  for (const auto& r : data.realizations) want += (r.states(1, 0) - r.states(0, 0)) / 1e-3;
  EXPECT_NEAR(p.Y[0], want / 10.0, 1e-9);
}
