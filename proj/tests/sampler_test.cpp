#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "twinforge/sampler.hpp"

using namespace twinforge;

namespace {

std::vector<std::string> labels_for(Eigen::Index k) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < k; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

struct Synthetic {
  Eigen::MatrixXd L;
  Eigen::VectorXd Y;
};

// Y = 3 l_2 - 5 l_7 + 0.1 e with a Gaussian library.
Synthetic sparse_problem(std::uint64_t seed, int n = 200, int k = 10) {
  Rng rng(seed);
  Synthetic s;
  s.L.resize(n, k);
  s.Y.resize(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < k; ++c) s.L(r, c) = rng.normal();
    s.Y[r] = 3.0 * s.L(r, 2) - 5.0 * s.L(r, 7) + 0.1 * rng.normal();
  }
  return s;
}

Hyperparameters fast() {
  Hyperparameters hp;
  hp.n_mcmc = 1500;
  hp.n_burn = 300;
  return hp;
}

}  // namespace

TEST(Rng, InverseGammaMean) {
  Rng rng(1);
  const double a = 6.0, b = 3.0;
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rng.inverse_gamma(a, b);
  const double mean = b / (a - 1.0);
  const double sd = std::sqrt(b * b / ((a - 1) * (a - 1) * (a - 2)));
  EXPECT_NEAR(sum / n, mean, 4.0 * sd / std::sqrt(n));
}

TEST(Rng, BetaMean) {
  Rng rng(2);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += rng.beta(2.0, 5.0);
  EXPECT_NEAR(sum / n, 2.0 / 7.0, 0.003);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(Hyperparameters, Validation) {
  Hyperparameters hp;
  EXPECT_NO_THROW(hp.validate());
  hp.n_burn = hp.n_mcmc;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = Hyperparameters{};
  hp.alpha_sigma = 0.0;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = Hyperparameters{};
  hp.p0_init = 1.0;
  EXPECT_THROW(hp.validate(), ConfigError);
  EXPECT_EQ(Hyperparameters::loose_threshold().pip_threshold, 0.5);
}

TEST(RegressionData, ScalingRecordsFactors) {
  const auto p = sparse_problem(3);
  const auto d = make_regression_data(p.Y, p.L, labels_for(10), Scaling::rms);
  for (Eigen::Index k = 0; k < 10; ++k) EXPECT_NEAR(d.gram(k, k), static_cast<double>(p.Y.size()), 1e-9);
  EXPECT_NEAR(d.yy, static_cast<double>(p.Y.size()), 1e-9);
  EXPECT_THROW(make_regression_data(p.Y.head(5), p.L, labels_for(10), Scaling::none), DataError);
  EXPECT_THROW(make_regression_data(p.Y, p.L, labels_for(3), Scaling::none), DataError);
}

TEST(Marginal, LogMarginalMatchesMultivariateT) {
  Rng rng(4);
  Eigen::VectorXd l(40), y(40);
  for (int i = 0; i < 40; ++i) {
    l[i] = rng.normal();
    y[i] = 0.7 * l[i] + 0.3 * rng.normal();
  }
  Hyperparameters hp;
  hp.alpha_sigma = 2.5;
  hp.beta_sigma = 1.5;
  const auto d = make_regression_data(y, l, {"c0"}, Scaling::none);
  for (double v : {0.1, 1.0, 10.0}) {
    for (bool inc : {false, true}) {
      const double got = log_marginal_likelihood(d, {static_cast<unsigned char>(inc)}, v, hp, true);
      const long double want = oracle::log_ml_single(y, l, inc, v, hp.alpha_sigma, hp.beta_sigma);
      EXPECT_NEAR(got, static_cast<double>(want), 1e-10 * std::fabs(static_cast<double>(want)));
    }
  }
}

TEST(Marginal, SingleColumnInclusionProbability) {
  Rng rng(5);
  Eigen::VectorXd l(30), y(30);
  for (int i = 0; i < 30; ++i) {
    l[i] = rng.normal();
    y[i] = 0.2 * l[i] + rng.normal();
  }
  Hyperparameters hp;
  const auto d = make_regression_data(y, l, {"c0"}, Scaling::none);
  for (double p0 : {0.05, 0.1, 0.5}) {
    for (double v : {0.5, 10.0}) {
      const long double l1 = oracle::log_ml_single(y, l, true, v, hp.alpha_sigma, hp.beta_sigma);
      const long double l0 = oracle::log_ml_single(y, l, false, v, hp.alpha_sigma, hp.beta_sigma);
      const long double ratio = std::exp(l0 - l1);
      const long double want = p0 / (p0 + ratio * (1 - p0));
      const double got = inclusion_probability(d, {0}, 0, v, p0, hp);
      EXPECT_NEAR(got, static_cast<double>(want), 1e-10 * static_cast<double>(want));
    }
  }
}

TEST(Gibbs, FrozenLatentsThetaMatchesConjugateGaussian) {
  const auto p = sparse_problem(6, 60, 3);
  const auto d = make_regression_data(p.Y, p.L, labels_for(3), Scaling::none);
  Hyperparameters hp;
  hp.update_latents = hp.update_sigma2 = hp.update_theta_s = hp.update_p0 = false;
  hp.n_mcmc = 10000;
  hp.n_burn = 1;
  SamplerState st;
  st.rng = Rng(7);
  st.psi = {1, 0, 1};
  st.theta = Eigen::VectorXd::Zero(3);
  st.sigma2 = 0.04;
  st.theta_s = 2.0;
  ChainTrace trace;
  run_chain_from(st, d, hp, 7, &trace);

  // Closed form over the active pair {0, 2}.
  Eigen::MatrixXd Lr(p.L.rows(), 2);
  Lr << p.L.col(0), p.L.col(2);
  const Eigen::MatrixXd A = Lr.transpose() * Lr + Eigen::MatrixXd::Identity(2, 2) / 2.0;
  const Eigen::MatrixXd Ainv = A.inverse();
  const Eigen::VectorXd mean = Ainv * Lr.transpose() * p.Y;
  const Eigen::MatrixXd cov = 0.04 * Ainv;

  const int idx[2] = {0, 2};
  for (int a = 0; a < 2; ++a) {
    std::vector<double> xs;
    for (const auto& th : trace.theta) xs.push_back(th[idx[a]]);
    const double sd = std::sqrt(cov(a, a));
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    EXPECT_NEAR(m, mean[a], 3.0 * sd / std::sqrt(static_cast<double>(xs.size())));
    const double D = oracle::ks_statistic(xs, [&](double x) { return oracle::normal_cdf(x, mean[a], sd); });
    EXPECT_GT(oracle::ks_pvalue(D, xs.size()), 0.01);
  }
  for (const auto& th : trace.theta) EXPECT_EQ(th[1], 0.0);
}

TEST(Gibbs, GreedyInitPicksTheGeneratingColumn) {
  Rng rng(8);
  Eigen::MatrixXd L(100, 4);
  Eigen::VectorXd Y(100);
  for (int r = 0; r < 100; ++r) {
    for (int c = 0; c < 4; ++c) L(r, c) = rng.normal();
    Y[r] = 2.0 * L(r, 0);
  }
  const auto d = make_regression_data(Y, L, labels_for(4), Scaling::residual);
  const auto st = initialize(d, Hyperparameters{}, 1);
  EXPECT_EQ(st.psi, (std::vector<unsigned char>{1, 0, 0, 0}));
}

TEST(Gibbs, RecoversSparseSupport) {
  const auto p = sparse_problem(9);
  const auto s = run_chain(make_regression_data(p.Y, p.L, labels_for(10), Scaling::residual), fast(), 11);
  EXPECT_EQ(s.selected, (std::vector<int>{2, 7}));
  EXPECT_NEAR(s.mu_theta[2], 3.0, 0.05);
  EXPECT_NEAR(s.mu_theta[7], -5.0, 0.05);
  EXPECT_NEAR(s.mu_sigma2, 0.01, 0.005);
  for (Eigen::Index k = 0; k < 10; ++k)
    if (k != 2 && k != 7) {
      EXPECT_EQ(s.mu_theta[k], 0.0);
      EXPECT_EQ(s.sigma_theta.row(k).norm(), 0.0);
    }
}

TEST(Gibbs, ScalingModesAgreeOnSupport) {
  const auto p = sparse_problem(12);
  Eigen::MatrixXd L = p.L;
  L.col(4) *= 1e3;
  L.col(7) *= 1e-2;
  for (Scaling sc : {Scaling::none, Scaling::rms, Scaling::residual}) {
    const auto s = run_chain(make_regression_data(p.Y, L, labels_for(10), sc), fast(), 13);
    EXPECT_TRUE(s.is_selected(2)) << scaling_name(sc);
    EXPECT_TRUE(s.is_selected(7)) << scaling_name(sc);
    EXPECT_NEAR(s.mu_theta[7] * 1e-2, -5.0, 0.1) << scaling_name(sc);
  }
}

TEST(Gibbs, SameSeedIsBitIdentical) {
  const auto p = sparse_problem(14);
  const auto d = make_regression_data(p.Y, p.L, labels_for(10), Scaling::residual);
  auto hp = fast();
  hp.random_order = true;
  const auto a = run_chain(d, hp, 99);
  const auto b = run_chain(d, hp, 99);
  EXPECT_EQ(a.pip, b.pip);
  EXPECT_EQ(a.mu_theta, b.mu_theta);
  EXPECT_EQ(a.sigma_theta, b.sigma_theta);
  EXPECT_EQ(a.mu_sigma2, b.mu_sigma2);
  const auto c = run_chain(d, hp, 100);
  EXPECT_NE(a.mu_theta, c.mu_theta);
}

TEST(Gibbs, SummaryInvariants) {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const auto p = sparse_problem(seed, 80, 8);
    ChainTrace trace;
    const auto s = run_chain(make_regression_data(p.Y, p.L, labels_for(8), Scaling::residual), fast(), seed, &trace);
    ASSERT_EQ(static_cast<int>(trace.psi.size()), s.n_mc);
    for (Eigen::Index k = 0; k < 8; ++k) {
      double m = 0.0;
      for (const auto& psi : trace.psi) m += psi[static_cast<std::size_t>(k)];
      EXPECT_DOUBLE_EQ(s.pip[k], m / s.n_mc);
      EXPECT_GE(s.pip[k], 0.0);
      EXPECT_LE(s.pip[k], 1.0);
      EXPECT_EQ(s.is_selected(static_cast<std::size_t>(k)), s.pip[k] > 0.7);
    }
    EXPECT_TRUE(s.sigma_theta.isApprox(s.sigma_theta.transpose()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.sigma_theta);
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()));
    EXPECT_GT(s.mu_sigma2, 0.0);
  }
}

TEST(Gibbs, IllConditionedBlockNamesColumns) {
  Rng rng(30);
  Eigen::MatrixXd L(50, 2);
  Eigen::VectorXd Y(50);
  for (int r = 0; r < 50; ++r) {
    L(r, 0) = 1e14 * rng.normal();
    L(r, 1) = rng.normal();
    Y[r] = L(r, 1);
  }
  const auto d = make_regression_data(Y, L, {"huge", "ok"}, Scaling::none);
  try {
    log_marginal_likelihood(d, {1, 1}, 10.0, Hyperparameters{});
    FAIL() << "expected SamplerError";
  } catch (const SamplerError& e) {
    EXPECT_EQ(e.columns(), (std::vector<std::string>{"huge", "ok"}));
  }
}

TEST(Predict, MomentsAndLabelCheck) {
  PosteriorSummary s;
  s.labels = {"a", "b"};
  s.mu_theta = Eigen::Vector2d(2.0, 0.0);
  s.sigma_theta = Eigen::Matrix2d::Zero();
  s.sigma_theta(0, 0) = 0.25;
  s.mu_sigma2 = 0.5;
  LibraryMatrix Lp;
  Lp.values = (Eigen::MatrixXd(2, 2) << 1.0, 3.0, 2.0, 1.0).finished();
  Lp.column_labels = {"a", "b"};
  const auto p = predict(s, Lp);
  EXPECT_EQ(p.mean, Eigen::Vector2d(2.0, 4.0));
  EXPECT_DOUBLE_EQ(p.cov(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(p.cov(1, 1), 1.5);
  EXPECT_DOUBLE_EQ(p.cov(0, 1), 0.5);
  EXPECT_EQ(predict_variance(s, Lp), p.cov.diagonal());
  Lp.column_labels = {"b", "a"};
  EXPECT_THROW(predict(s, Lp), DataError);
}
