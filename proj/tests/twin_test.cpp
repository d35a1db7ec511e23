#include <gtest/gtest.h>

#include <cmath>

#include "twinforge/io.hpp"
#include "twinforge/twin.hpp"

using namespace twinforge;

namespace {

Hyperparameters fast() {
  Hyperparameters hp;
  hp.n_mcmc = 1200;
  hp.n_burn = 200;
  return hp;
}

LibrarySpec cubic_with_input() {
  LibrarySpec s;
  s.families = {Family::constant, Family::multinomial};
  s.max_degree = 3;
  s.state_dim = 2;
  s.input_dim = 1;
  s.include_input = true;
  return s;
}

// A twin whose velocity equation carries the exact Duffing discrepancy.
UpdatedTwin exact_duffing_twin(int framework) {
  const auto sys = make_system("duffing");
  UpdatedTwin tw;
  tw.framework = framework;
  tw.system = "duffing";
  tw.params = sys.params;
  tw.nominal = sys.nominal;
  tw.drift_spec = cubic_with_input();
  if (framework == 2) tw.drift_spec.include_input = false, tw.drift_spec.input_dim = 0;
  const auto labels = column_labels(tw.drift_spec);
  tw.states.resize(2);
  tw.states[0].state = 0;
  tw.states[0].note = "kinematic identity";
  auto& eq = tw.states[1];
  eq.state = 1;
  eq.regressed = true;
  eq.summary.labels = labels;
  const auto K = static_cast<Eigen::Index>(labels.size());
  eq.summary.pip = Eigen::VectorXd::Zero(K);
  eq.summary.mu_theta = Eigen::VectorXd::Zero(K);
  eq.summary.sigma_theta = Eigen::MatrixXd::Zero(K, K);
  eq.summary.mu_sigma2 = 4.0;
  const auto truth = framework == 1 ? sys.truth : sys.drift_truth();
  for (const auto& t : truth[1]) {
    const auto k = std::find(labels.begin(), labels.end(), t.label) - labels.begin();
    eq.summary.selected.push_back(static_cast<int>(k));
    eq.summary.mu_theta[k] = t.value;
    eq.summary.pip[k] = 1.0;
    eq.terms.push_back({t.label, t.value, 0.0, 1.0});
  }
  std::sort(eq.summary.selected.begin(), eq.summary.selected.end());
  if (framework == 2) {
    DiffusionEquation d;
    d.i = d.j = 1;
    d.magnitude = 0.5;
    d.magnitude_std = 0.0;
    tw.diffusion.push_back(d);
  }
  return tw;
}

}  // namespace

TEST(UpdateF1, RecoversDuffingCubicWithoutNoise) {
  auto e = preset("duffing", 1);
  e.noise = 0.0;
  e.hp = fast();
  const auto run = run_experiment(e, 3);
  const auto& tw = run.twin;
  EXPECT_FALSE(tw.states[0].regressed);
  EXPECT_EQ(tw.states[0].note, "kinematic identity");
  EXPECT_EQ(tw.selected_labels(1), (std::vector<std::string>{"X1^3", "u1"}));
  EXPECT_NEAR(tw.coefficient(1, "X1^3"), -1e5, 1e5 * 0.01);
  EXPECT_NEAR(tw.coefficient(1, "u1"), 1.0, 0.02);
  EXPECT_EQ(tw.coefficient(1, "X2"), 0.0);
}

TEST(UpdateF1, ExactNominalIsGatedByEnergyFloor) {
  const auto sys = linear_oscillator(1.0, 0.5, 40.0);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(1000, 1);
  auto s = sys;
  s.x0 = Eigen::Vector2d(0.2, 0.0);
  const Dataset data = rk4_simulate_with_input(s, u, 1e-3);
  const auto tw = update_f1(data, sys.nominal, cubic_with_input(), fast(), 1);
  EXPECT_FALSE(tw.states[1].regressed);
  EXPECT_EQ(tw.states[1].note, "residual below energy floor");
  EXPECT_TRUE(tw.selected_labels(1).empty());
}

TEST(UpdateF1, JobCountDoesNotChangeResults) {
  auto e = preset("duffing", 1);
  e.hp = fast();
  const Dataset data = simulate_experiment(e, 4);
  const auto sys = e.make();
  const auto a = update_f1(data, sys.nominal, e.drift_spec, e.hp, 4, e.drift_options, 1);
  const auto b = update_f1(data, sys.nominal, e.drift_spec, e.hp, 4, e.drift_options, 2);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(UpdateF2, OrnsteinUhlenbeckDriftAndMagnitude) {
  const auto sys = ornstein_uhlenbeck(2.0, 0.5, 1.0);
  const Dataset data = em_simulate(sys, 1.0, 1e-3, 100, 9);
  LibrarySpec drift;
  drift.families = {Family::constant, Family::multinomial};
  drift.max_degree = 2;
  drift.state_dim = 1;
  LibrarySpec diff = drift;
  diff.max_degree = 1;
  const auto tw = update_f2(data, sys.nominal, drift, diff, fast(), 9);
  EXPECT_EQ(tw.selected_labels(0), (std::vector<std::string>{"X1"}));
  EXPECT_NEAR(tw.coefficient(0, "X1"), -2.0, 0.3);
  ASSERT_EQ(tw.diffusion.size(), 1u);
  EXPECT_NEAR(tw.diffusion[0].magnitude, 0.5, 0.025);
  EXPECT_GT(tw.diffusion[0].magnitude_std, 0.0);
  const auto f = discovered_drift(tw);
  EXPECT_NEAR(f(Eigen::VectorXd::Constant(1, 2.0))[0], 2.0 * tw.coefficient(0, "X1"), 1e-12);
}

TEST(Equations, RenderParseRoundTrip) {
  auto e = preset("duffing", 1);
  e.hp = fast();
  const auto tw = run_experiment(e, 5).twin;
  const std::string text = render_equations(tw);
  EXPECT_NE(text.find("dX1/dt = X2"), std::string::npos);
  const auto parsed = parse_equations(text);
  std::size_t n = 0;
  for (const auto& eq : tw.states) {
    for (const auto& t : eq.terms) {
      const auto it = std::find_if(parsed.begin(), parsed.end(),
                                   [&](const ParsedTerm& p) { return p.state == eq.state && p.label == t.label; });
      ASSERT_NE(it, parsed.end()) << t.label;
      EXPECT_NEAR(it->mean, t.mean, 1e-9 * std::fabs(t.mean));
      EXPECT_NEAR(it->std, t.std, 1e-3 * t.std);
      ++n;
    }
  }
  EXPECT_EQ(parsed.size(), n);
}

TEST(Predict, ExactTwinReproducesRk4Truth) {
  const auto tw = exact_duffing_twin(1);
  const auto sys = make_system("duffing");
  const Dataset truth = rk4_simulate(sys, 1.0, 1e-3, 77);
  const auto& u = truth.realizations[0].inputs;
  const auto p = predict_states(tw, sys.x0, u, 1e-3);
  EXPECT_LT(nrmse(p.mean, truth.realizations[0].states), 1e-10);
  // Local band: zero parameter covariance leaves the noise variance alone.
  EXPECT_NEAR(p.variance(10, 1), 4.0, 1e-12);
  EXPECT_EQ(p.variance.col(0).norm(), 0.0);
  EXPECT_TRUE((p.upper().array() >= p.lower().array()).all());
}

TEST(Predict, FrameworkTwoSharesTheBrownianPath) {
  const auto tw = exact_duffing_twin(2);
  auto sys = make_system("duffing");
  sys.x0 = Eigen::Vector2d(0.05, 0.0);
  const Dataset truth = em_simulate(sys, 1.0, 1e-3, 1, 31);
  const auto p = predict_states(tw, sys.x0, Eigen::MatrixXd(1000, 0), 1e-3, 31);
  EXPECT_LT(nrmse(p.mean, truth.realizations[0].states), 1e-10);
  const auto q = predict_states(tw, sys.x0, Eigen::MatrixXd(1000, 0), 1e-3, 32);
  EXPECT_GT(nrmse(q.mean, truth.realizations[0].states), 1e-3);
}

TEST(Predict, PropagatedBandWithoutUncertaintyIsDegenerate) {
  const auto tw = exact_duffing_twin(1);
  const auto sys = make_system("duffing");
  const Dataset truth = rk4_simulate(sys, 0.2, 1e-3, 1);
  PredictOptions opt;
  opt.band = BandMode::propagated;
  opt.n_samples = 5;
  const auto p = predict_states(tw, sys.x0, truth.realizations[0].inputs, 1e-3, 0, opt);
  EXPECT_LT(p.variance.maxCoeff(), 1e-20);
}

TEST(Predict, PropagatedBandGrowsWithCovariance) {
  auto tw = exact_duffing_twin(1);
  auto& s = tw.states[1].summary;
  for (int k : s.selected) s.sigma_theta(k, k) = std::pow(0.01 * s.mu_theta[k], 2);
  const auto sys = make_system("duffing");
  const Dataset truth = rk4_simulate(sys, 0.5, 1e-3, 1);
  PredictOptions opt;
  opt.band = BandMode::propagated;
  opt.n_samples = 20;
  const auto p = predict_states(tw, sys.x0, truth.realizations[0].inputs, 1e-3, 0, opt);
  EXPECT_LT(p.variance.row(0).norm(), 1e-30);
  EXPECT_GT(p.variance(499, 0), 0.0);
}

TEST(Predict, DivergenceBecomesPredictError) {
  auto tw = exact_duffing_twin(1);
  auto& s = tw.states[1].summary;
  for (int k : s.selected)
    if (s.labels[static_cast<std::size_t>(k)] == "X1^3") s.mu_theta[k] = 1e9;
  EXPECT_THROW(predict_states(tw, Eigen::Vector2d(1.0, 0.0), Eigen::MatrixXd::Zero(1000, 1), 1e-3), PredictError);
}

TEST(Metrics, Nrmse) {
  Eigen::MatrixXd a(2, 1), b(2, 1);
  a << 1.0, -1.0;
  b << 1.0, -0.8;
  EXPECT_NEAR(nrmse(b, a), std::sqrt(0.02), 1e-15);
  EXPECT_EQ(nrmse(a, a), 0.0);
}

TEST(Sweep, ExactSupportAndTermError) {
  auto e = preset("duffing", 1);
  const auto truth = truth_terms(e);
  ASSERT_EQ(truth.size(), 2u);
  auto tw = exact_duffing_twin(1);
  tw.drift_spec = e.drift_spec;
  EXPECT_TRUE(exact_support(tw, truth));
  for (const auto& t : truth) EXPECT_NEAR(term_error(tw, t), 0.0, 1e-15);
  tw.states[1].terms.pop_back();
  EXPECT_FALSE(exact_support(tw, truth));
  EXPECT_EQ(term_error(tw, truth[1]), 1.0);
}
