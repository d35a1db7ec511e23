#pragma once

// Spike-and-slab sparse Bayesian linear regression, sampled with a Gibbs
// chain whose latent-indicator step integrates out theta and sigma^2.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "twinforge/dictionary.hpp"
#include "twinforge/error.hpp"
#include "twinforge/random.hpp"

namespace twinforge {

/// How Y and the library columns are rescaled before sampling. Results are
/// always reported in the original units.
enum class Scaling {
  none,      // raw units
  rms,       // columns and Y divided by their root-mean-square
  residual,  // columns by RMS, Y by the OLS residual standard deviation
};

inline const char* scaling_name(Scaling s) {
  switch (s) {
    case Scaling::none: return "none";
    case Scaling::rms: return "rms";
    case Scaling::residual: return "residual";
  }
  return "?";
}

inline Scaling scaling_from_name(const std::string& s) {
  if (s == "none") return Scaling::none;
  if (s == "rms") return Scaling::rms;
  if (s == "residual") return Scaling::residual;
  throw ConfigError("unknown scaling '" + s + "'");
}

struct Hyperparameters {
  double alpha_p = 0.1;
  double beta_p = 1.0;
  double alpha_sigma = 1e4;
  double beta_sigma = 1e4;
  double alpha_v = 0.5;
  double beta_v = 0.5;
  double p0_init = 0.1;
  double theta_s_init = 10.0;
  int n_mcmc = 3000;  // total sweeps, burn-in included
  int n_burn = 500;
  double pip_threshold = 0.7;

  bool random_order = false;  // latent sweep order; ascending index when false
  Scaling scaling = Scaling::residual;

  // Individual Gibbs steps can be frozen at their initial value.
  bool update_latents = true;
  bool update_sigma2 = true;
  bool update_theta_s = true;
  bool update_p0 = true;

  void validate() const {
    for (double v : {alpha_p, beta_p, alpha_sigma, beta_sigma, alpha_v, beta_v, theta_s_init})
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("hyperparameter shapes and scales must be positive");
    if (!(p0_init > 0.0 && p0_init < 1.0)) throw ConfigError("p0_init must lie in (0, 1)");
    if (n_burn < 0 || n_burn >= n_mcmc) throw ConfigError("need 0 <= n_burn < n_mcmc");
    if (!(pip_threshold > 0.0 && pip_threshold < 1.0)) throw ConfigError("pip_threshold must lie in (0, 1)");
  }

  /// Selection at PIP > 0.5 instead of 0.7.
  static Hyperparameters loose_threshold() {
    Hyperparameters hp;
    hp.pip_threshold = 0.5;
    return hp;
  }
};

/// Sufficient statistics of one (possibly rescaled) regression problem.
/// Sweep cost depends on K and the active-set size only, not on N.
struct RegressionData {
  Eigen::MatrixXd gram;  // L^T L
  Eigen::VectorXd lty;   // L^T Y
  double yy = 0.0;       // Y^T Y
  Eigen::Index n = 0;
  std::vector<std::string> labels;
  Eigen::VectorXd column_scale;  // theta_k(original) = theta_k(scaled) * y_scale / column_scale_k
  double y_scale = 1.0;

  Eigen::Index k() const { return gram.rows(); }
};

namespace detail {

/// Variance (RSS / N) of the least-squares residual of Y on L. A tiny ridge
/// term keeps rank-deficient libraries solvable.
inline double ols_residual_variance(const Eigen::MatrixXd& L, const Eigen::VectorXd& Y) {
  if (L.cols() == 0) return Y.squaredNorm() / static_cast<double>(Y.size());
  const Eigen::MatrixXd G = L.transpose() * L;
  const double ridge = 1e-10 * std::max(G.diagonal().maxCoeff(), 1e-300);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G + ridge * Eigen::MatrixXd::Identity(G.rows(), G.cols()));
  const Eigen::VectorXd theta = ldlt.solve(L.transpose() * Y);
  const Eigen::VectorXd r = Y - L * theta;
  const double v = r.squaredNorm() / static_cast<double>(Y.size());
  return std::isfinite(v) ? v : Y.squaredNorm() / static_cast<double>(Y.size());
}

}  // namespace detail

inline RegressionData make_regression_data(const Eigen::VectorXd& Y, const Eigen::MatrixXd& L,
                                           std::vector<std::string> labels, Scaling scaling) {
  if (Y.size() == 0 || L.rows() != Y.size()) throw DataError("target and library row counts differ or are zero");
  if (L.cols() < 1) throw DataError("library has no columns");
  if (!Y.allFinite() || !L.allFinite()) throw DataError("non-finite entries in regression data");
  if (static_cast<Eigen::Index>(labels.size()) != L.cols()) throw DataError("label count differs from column count");

  RegressionData d;
  d.n = Y.size();
  d.labels = std::move(labels);
  const double nn = static_cast<double>(d.n);
  d.column_scale = Eigen::VectorXd::Ones(L.cols());
  if (scaling != Scaling::none) {
    for (Eigen::Index k = 0; k < L.cols(); ++k) {
      const double s = std::sqrt(L.col(k).squaredNorm() / nn);
      d.column_scale[k] = s > 0.0 ? s : 1.0;
    }
  }
  const Eigen::MatrixXd Ls = L * d.column_scale.cwiseInverse().asDiagonal();
  const double msy = Y.squaredNorm() / nn;
  if (scaling == Scaling::rms) {
    d.y_scale = msy > 0.0 ? std::sqrt(msy) : 1.0;
  } else if (scaling == Scaling::residual) {
    const double v = std::max(detail::ols_residual_variance(Ls, Y), 1e-12 * msy);
    d.y_scale = v > 0.0 ? std::sqrt(v) : 1.0;
  }
  const Eigen::VectorXd Ys = Y / d.y_scale;
  d.gram = Ls.transpose() * Ls;
  d.lty = Ls.transpose() * Ys;
  d.yy = Ys.squaredNorm();
  return d;
}

inline RegressionData make_regression_data(const Eigen::VectorXd& Y, const LibraryMatrix& L, Scaling scaling) {
  return make_regression_data(Y, L.values, L.column_labels, scaling);
}

struct SamplerState {
  Eigen::VectorXd theta;              // zero where psi is zero
  std::vector<unsigned char> psi;     // latent indicators
  double theta_s = 10.0;
  double sigma2 = 1.0;
  double p0 = 0.1;
  Rng rng;

  int active_count() const { return static_cast<int>(std::count(psi.begin(), psi.end(), 1)); }
};

namespace detail {

inline std::vector<Eigen::Index> active_set(const std::vector<unsigned char>& psi) {
  std::vector<Eigen::Index> idx;
  for (std::size_t k = 0; k < psi.size(); ++k)
    if (psi[k]) idx.push_back(static_cast<Eigen::Index>(k));
  return idx;
}

/// A = G_rr + I/theta_s factorized, with b_r and the quadratic form
/// b_r^T A^{-1} b_r.
struct ActiveSystem {
  std::vector<Eigen::Index> idx;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd b;
  Eigen::VectorXd mean;  // A^{-1} b
  double quad = 0.0;
  double log_det = 0.0;
};

inline ActiveSystem factor_active(const RegressionData& d, const std::vector<unsigned char>& psi, double theta_s) {
  ActiveSystem s;
  s.idx = active_set(psi);
  const auto h = static_cast<Eigen::Index>(s.idx.size());
  if (h == 0) return s;
  Eigen::MatrixXd A(h, h);
  s.b.resize(h);
  for (Eigen::Index a = 0; a < h; ++a) {
    s.b[a] = d.lty[s.idx[a]];
    for (Eigen::Index c = 0; c < h; ++c) A(a, c) = d.gram(s.idx[a], s.idx[c]);
    A(a, a) += 1.0 / theta_s;
  }
  s.llt.compute(A);
  bool ok = s.llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd diag = s.llt.matrixLLT().diagonal();
    ok = diag.allFinite() && diag.minCoeff() > 0.0 &&
         diag.minCoeff() > 1e-12 * diag.maxCoeff();  // condition number of A below ~1e24
    if (ok) {
      s.log_det = 2.0 * diag.array().log().sum();
      s.mean = s.llt.solve(s.b);
      s.quad = s.b.dot(s.mean);
      ok = s.mean.allFinite() && std::isfinite(s.quad);
    }
  }
  if (!ok) {
    std::vector<std::string> cols;
    for (auto k : s.idx) cols.push_back(d.labels[static_cast<std::size_t>(k)]);
    std::string msg = "ill-conditioned library block (L_r^T L_r + I/theta_s) over columns:";
    for (const auto& c : cols) msg += " " + c;
    throw SamplerError(msg, std::move(cols));
  }
  return s;
}

inline double residual_quadratic(const RegressionData& d, const ActiveSystem& s) {
  return std::max(d.yy - s.quad, 0.0);
}

}  // namespace detail

/// Log marginal likelihood of Y given the active set, with theta and sigma^2
/// integrated out and R0 = I. Without constants, only the terms that differ
/// between active sets are kept.
inline double log_marginal_likelihood(const RegressionData& d, const std::vector<unsigned char>& psi,
                                      double theta_s, const Hyperparameters& hp, bool with_constants = false) {
  const auto s = detail::factor_active(d, psi, theta_s);
  const double nn = static_cast<double>(d.n);
  const double h = static_cast<double>(s.idx.size());
  double v = -0.5 * h * std::log(theta_s) - 0.5 * s.log_det -
             (hp.alpha_sigma + 0.5 * nn) * std::log(hp.beta_sigma + 0.5 * detail::residual_quadratic(d, s));
  if (with_constants) {
    v += std::lgamma(hp.alpha_sigma + 0.5 * nn) + hp.alpha_sigma * std::log(hp.beta_sigma) -
         std::lgamma(hp.alpha_sigma) - 0.5 * nn * std::log(2.0 * M_PI);
  }
  return v;
}

/// P(psi_k = 1 | rest) = p0 / (p0 + lambda (1 - p0)), lambda = ML(psi_k=0) / ML(psi_k=1).
inline double inclusion_probability(const RegressionData& d, std::vector<unsigned char> psi, std::size_t k,
                                    double theta_s, double p0, const Hyperparameters& hp) {
  if (p0 <= 0.0) return 0.0;
  if (p0 >= 1.0) return 1.0;
  psi[k] = 0;
  const double l0 = log_marginal_likelihood(d, psi, theta_s, hp);
  psi[k] = 1;
  const double l1 = log_marginal_likelihood(d, psi, theta_s, hp);
  const double z = (l1 - l0) + std::log(p0) - std::log1p(-p0);
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

namespace detail {

inline void draw_theta(const RegressionData& d, SamplerState& st) {
  st.theta = Eigen::VectorXd::Zero(d.k());
  const auto s = factor_active(d, st.psi, st.theta_s);
  if (s.idx.empty()) return;
  Eigen::VectorXd z(static_cast<Eigen::Index>(s.idx.size()));
  for (Eigen::Index a = 0; a < z.size(); ++a) z[a] = st.rng.normal();
  // A = U^T U with U upper; theta ~ N(A^{-1} b, sigma2 A^{-1}).
  const Eigen::VectorXd dev = s.llt.matrixU().solve(z) * std::sqrt(st.sigma2);
  for (std::size_t a = 0; a < s.idx.size(); ++a)
    st.theta[s.idx[a]] = s.mean[static_cast<Eigen::Index>(a)] + dev[static_cast<Eigen::Index>(a)];
}

}  // namespace detail

/// Initial chain state: sigma^2 from the OLS residual, an active set grown by
/// forward selection, and theta drawn from its conditional Gaussian.
inline SamplerState initialize(const RegressionData& d, const Hyperparameters& hp, std::uint64_t seed) {
  hp.validate();
  const auto K = d.k();
  const double nn = static_cast<double>(d.n);
  if (d.yy == 0.0 && K == 0) throw DataError("all-zero target with an empty library");

  SamplerState st;
  st.rng = Rng(seed);
  st.p0 = hp.p0_init;
  st.theta_s = hp.theta_s_init;
  st.psi.assign(static_cast<std::size_t>(K), 0);

  // Residual variance of the full OLS fit, from sufficient statistics.
  const double ridge = 1e-10 * std::max(d.gram.diagonal().maxCoeff(), 1e-300);
  Eigen::LDLT<Eigen::MatrixXd> full(d.gram + ridge * Eigen::MatrixXd::Identity(K, K));
  const Eigen::VectorXd theta_ols = full.solve(d.lty);
  double rss = d.yy - 2.0 * theta_ols.dot(d.lty) + theta_ols.dot(d.gram * theta_ols);
  if (!std::isfinite(rss)) rss = d.yy;
  const double floor = std::max(1e-12 * d.yy / nn, std::numeric_limits<double>::min());
  st.sigma2 = std::max(rss / nn, floor);

  // Forward selection: add the column with the largest error reduction while
  // the gain passes a BIC-style bar.
  const auto mse_of = [&](const std::vector<unsigned char>& psi) {
    const auto idx = detail::active_set(psi);
    if (idx.empty()) return d.yy / nn;
    const auto h = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd G(h, h);
    Eigen::VectorXd b(h);
    for (Eigen::Index a = 0; a < h; ++a) {
      b[a] = d.lty[idx[a]];
      for (Eigen::Index c = 0; c < h; ++c) G(a, c) = d.gram(idx[a], idx[c]);
    }
    G.diagonal().array() += 1e-12 * std::max(G.diagonal().maxCoeff(), 1e-300);
    const Eigen::VectorXd t = G.ldlt().solve(b);
    const double r = d.yy - 2.0 * t.dot(b) + t.dot(G * t);
    return std::isfinite(r) ? std::max(r, 0.0) / nn : d.yy / nn;
  };
  double current = mse_of(st.psi);
  const double mse_floor = 1e-14 * d.yy / nn + std::numeric_limits<double>::min();
  const int max_active = static_cast<int>(std::min<Eigen::Index>(K, std::max<Eigen::Index>(d.n - 1, 1)));
  for (int step = 0; step < max_active && current > mse_floor; ++step) {
    double best = current;
    Eigen::Index best_k = -1;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (st.psi[static_cast<std::size_t>(k)]) continue;
      auto trial = st.psi;
      trial[static_cast<std::size_t>(k)] = 1;
      const double m = mse_of(trial);
      if (m < best) {
        best = m;
        best_k = k;
      }
    }
    if (best_k < 0) break;
    const double gain = best <= mse_floor ? std::numeric_limits<double>::infinity() : nn * std::log(current / best);
    if (!(gain > std::log(nn))) break;
    st.psi[static_cast<std::size_t>(best_k)] = 1;
    current = best;
  }

  detail::draw_theta(d, st);
  return st;
}

/// One full Gibbs sweep: latents, sigma^2, slab variance, p0, then theta.
inline void gibbs_sweep(SamplerState& st, const RegressionData& d, const Hyperparameters& hp) {
  const auto K = static_cast<std::size_t>(d.k());
  const double nn = static_cast<double>(d.n);

  if (hp.update_latents) {
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (hp.random_order) std::shuffle(order.begin(), order.end(), st.rng.engine());
    for (std::size_t k : order) {
      const double p = inclusion_probability(d, st.psi, k, st.theta_s, st.p0, hp);
      st.psi[k] = st.rng.bernoulli(p) ? 1 : 0;
    }
  }

  const auto sys = detail::factor_active(d, st.psi, st.theta_s);
  const double h = static_cast<double>(sys.idx.size());
  if (hp.update_sigma2)
    st.sigma2 = st.rng.inverse_gamma(hp.alpha_sigma + 0.5 * nn,
                                     hp.beta_sigma + 0.5 * detail::residual_quadratic(d, sys));

  if (hp.update_theta_s) {
    double tt = 0.0;
    for (auto k : sys.idx) tt += st.theta[k] * st.theta[k];
    st.theta_s = st.rng.inverse_gamma(hp.alpha_v + 0.5 * h, hp.beta_v + tt / (2.0 * st.sigma2));
  }

  if (hp.update_p0) st.p0 = st.rng.beta(hp.alpha_p + h, hp.beta_p + static_cast<double>(K) - h);

  detail::draw_theta(d, st);
}

struct PosteriorSummary {
  std::vector<std::string> labels;
  Eigen::VectorXd pip;
  std::vector<int> selected;
  Eigen::VectorXd mu_theta;     // zero off the selected set
  Eigen::MatrixXd sigma_theta;  // zero off the selected block
  double mu_sigma2 = 0.0;
  int n_mc = 0;
  std::uint64_t seed = 0;
  Hyperparameters hyperparameters;
  Eigen::VectorXd flip_rate;  // fraction of retained sweeps in which psi_k changed
  bool confused = false;      // some pip in (0.3, 0.7)

  double std_of(std::size_t k) const {
    return std::sqrt(std::max(sigma_theta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)), 0.0));
  }
  bool is_selected(std::size_t k) const {
    return std::find(selected.begin(), selected.end(), static_cast<int>(k)) != selected.end();
  }
  std::vector<std::string> selected_labels() const {
    std::vector<std::string> out;
    for (int k : selected) out.push_back(labels[static_cast<std::size_t>(k)]);
    return out;
  }
};

/// Retained draws, in scaled-back original units, for callers that need them.
struct ChainTrace {
  std::vector<std::vector<unsigned char>> psi;
  std::vector<Eigen::VectorXd> theta;
  std::vector<double> sigma2;
};

/// Runs the chain from an explicit starting state.
inline PosteriorSummary run_chain_from(SamplerState st, const RegressionData& d, const Hyperparameters& hp,
                                       std::uint64_t seed, ChainTrace* trace = nullptr) {
  hp.validate();
  const auto K = d.k();
  const Eigen::VectorXd to_original = d.column_scale.cwiseInverse() * d.y_scale;
  const double s2_scale = d.y_scale * d.y_scale;

  std::vector<std::vector<unsigned char>> psis;
  std::vector<Eigen::VectorXd> thetas;
  std::vector<double> sigmas;
  const int keep = hp.n_mcmc - hp.n_burn;
  psis.reserve(static_cast<std::size_t>(keep));
  thetas.reserve(static_cast<std::size_t>(keep));
  sigmas.reserve(static_cast<std::size_t>(keep));
  Eigen::VectorXd flips = Eigen::VectorXd::Zero(K);

  for (int it = 0; it < hp.n_mcmc; ++it) {
    const auto before = st.psi;
    gibbs_sweep(st, d, hp);
    if (it < hp.n_burn) continue;
    for (Eigen::Index k = 0; k < K; ++k)
      if (before[static_cast<std::size_t>(k)] != st.psi[static_cast<std::size_t>(k)]) flips[k] += 1.0;
    psis.push_back(st.psi);
    thetas.push_back(st.theta.cwiseProduct(to_original));
    sigmas.push_back(st.sigma2 * s2_scale);
  }

  PosteriorSummary out;
  out.labels = d.labels;
  out.seed = seed;
  out.hyperparameters = hp;
  out.n_mc = keep;
  out.flip_rate = flips / static_cast<double>(keep);
  out.pip = Eigen::VectorXd::Zero(K);
  for (const auto& p : psis)
    for (Eigen::Index k = 0; k < K; ++k) out.pip[k] += p[static_cast<std::size_t>(k)];
  out.pip /= static_cast<double>(keep);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (out.pip[k] > hp.pip_threshold) out.selected.push_back(static_cast<int>(k));
    if (out.pip[k] > 0.3 && out.pip[k] < 0.7) out.confused = true;
  }
  out.mu_sigma2 = std::accumulate(sigmas.begin(), sigmas.end(), 0.0) / static_cast<double>(keep);

  // Moments of the selected coefficients over draws in which every selected
  // column is active; all retained draws if there are too few of those.
  out.mu_theta = Eigen::VectorXd::Zero(K);
  out.sigma_theta = Eigen::MatrixXd::Zero(K, K);
  if (!out.selected.empty()) {
    std::vector<std::size_t> use;
    for (std::size_t s = 0; s < psis.size(); ++s) {
      const bool all = std::all_of(out.selected.begin(), out.selected.end(),
                                   [&](int k) { return psis[s][static_cast<std::size_t>(k)] != 0; });
      if (all) use.push_back(s);
    }
    if (use.size() < 10) {
      use.resize(psis.size());
      std::iota(use.begin(), use.end(), std::size_t{0});
    }
    const auto r = static_cast<Eigen::Index>(out.selected.size());
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(use.size()), r);
    for (std::size_t s = 0; s < use.size(); ++s)
      for (Eigen::Index a = 0; a < r; ++a) samples(static_cast<Eigen::Index>(s), a) = thetas[use[s]][out.selected[static_cast<std::size_t>(a)]];
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    const double denom = std::max<double>(static_cast<double>(use.size()) - 1.0, 1.0);
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    for (Eigen::Index a = 0; a < r; ++a) {
      out.mu_theta[out.selected[static_cast<std::size_t>(a)]] = mean[a];
      for (Eigen::Index c = 0; c < r; ++c)
        out.sigma_theta(out.selected[static_cast<std::size_t>(a)], out.selected[static_cast<std::size_t>(c)]) =
            0.5 * (cov(a, c) + cov(c, a));
    }
  }

  if (trace != nullptr) {
    trace->psi = std::move(psis);
    trace->theta = std::move(thetas);
    trace->sigma2 = std::move(sigmas);
  }
  return out;
}

inline PosteriorSummary run_chain(const RegressionData& d, const Hyperparameters& hp, std::uint64_t seed,
                                  ChainTrace* trace = nullptr) {
  return run_chain_from(initialize(d, hp, seed), d, hp, seed, trace);
}

inline PosteriorSummary run_chain(const Eigen::VectorXd& Y, const LibraryMatrix& L, const Hyperparameters& hp,
                                  std::uint64_t seed, ChainTrace* trace = nullptr) {
  return run_chain(make_regression_data(Y, L, hp.scaling), hp, seed, trace);
}

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Predictive mean L_p mu_theta and covariance L_p Sigma_theta L_p^T + mu_sigma2 I.
inline Prediction predict(const PosteriorSummary& s, const LibraryMatrix& Lp) {
  if (Lp.column_labels != s.labels) throw DataError("test library columns do not match the training library");
  Prediction p;
  p.mean = Lp.values * s.mu_theta;
  p.cov = Lp.values * s.sigma_theta * Lp.values.transpose();
  p.cov.diagonal().array() += s.mu_sigma2;
  return p;
}

/// Diagonal of the predictive covariance only (O(N) memory).
inline Eigen::VectorXd predict_variance(const PosteriorSummary& s, const LibraryMatrix& Lp) {
  if (Lp.column_labels != s.labels) throw DataError("test library columns do not match the training library");
  const Eigen::MatrixXd LS = Lp.values * s.sigma_theta;
  Eigen::VectorXd v = (LS.array() * Lp.values.array()).rowwise().sum().matrix();
  v.array() += s.mu_sigma2;
  return v;
}

}  // namespace twinforge
