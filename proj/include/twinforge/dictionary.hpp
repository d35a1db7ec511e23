#pragma once

// Library of candidate basis functions: declaration (LibrarySpec), column
// enumeration, text labels, and evaluation into the design matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "twinforge/error.hpp"

namespace twinforge {

/// Basis families, in the canonical order in which their columns are emitted.
enum class Family {
  constant,
  multinomial,
  signum,
  neg_exp,          // exp(-Xi)
  exp_product,      // exp(-Xi)*Xj
  absolute,         // abs(Xi)
  signed_quadratic, // Xi*abs(Xj)
  sine,
  cosine,
};

inline constexpr int kMaxPolynomialDegree = 10;

inline const char* family_name(Family f) {
  switch (f) {
    case Family::constant: return "constant";
    case Family::multinomial: return "multinomial";
    case Family::signum: return "signum";
    case Family::neg_exp: return "neg_exp";
    case Family::exp_product: return "exp_product";
    case Family::absolute: return "absolute";
    case Family::signed_quadratic: return "signed_quadratic";
    case Family::sine: return "sine";
    case Family::cosine: return "cosine";
  }
  return "?";
}

inline Family family_from_name(std::string_view name) {
  for (Family f : {Family::constant, Family::multinomial, Family::signum, Family::neg_exp,
                   Family::exp_product, Family::absolute, Family::signed_quadratic, Family::sine,
                   Family::cosine}) {
    if (name == family_name(f)) return f;
  }
  throw ConfigError("unknown basis family '" + std::string(name) + "'");
}

inline std::vector<Family> all_families() {
  return {Family::constant, Family::multinomial, Family::signum,
          Family::neg_exp,  Family::exp_product, Family::absolute,
          Family::signed_quadratic, Family::sine, Family::cosine};
}

struct LibrarySpec {
  std::vector<Family> families;
  int max_degree = 6;
  bool include_input = false;
  int state_dim = 1;
  int input_dim = 0;
  /// Columns removed after enumeration, by label.
  std::vector<std::string> exclude;

  bool has(Family f) const { return std::find(families.begin(), families.end(), f) != families.end(); }
  bool operator==(const LibrarySpec&) const = default;
};

enum class ColumnKind {
  constant,
  monomial,
  signum,
  neg_exp,
  exp_product,
  absolute,
  signed_quadratic,
  sine,
  cosine,
  input,
};

/// One candidate basis function. Indices are zero-based; labels are one-based.
struct Column {
  ColumnKind kind = ColumnKind::constant;
  std::vector<int> powers;  // monomial exponents, one per state
  int i = 0;                // state index (or input channel for `input`)
  int j = 0;                // second state index for binary families

  bool operator==(const Column&) const = default;
};

// ---------------------------------------------------------------- labels

inline std::string column_label(const Column& c) {
  const auto x = [](int idx) { return "X" + std::to_string(idx + 1); };
  switch (c.kind) {
    case ColumnKind::constant: return "1";
    case ColumnKind::monomial: {
      std::string out;
      for (std::size_t s = 0; s < c.powers.size(); ++s) {
        if (c.powers[s] == 0) continue;
        if (!out.empty()) out += "*";
        out += x(static_cast<int>(s));
        if (c.powers[s] > 1) out += "^" + std::to_string(c.powers[s]);
      }
      return out;
    }
    case ColumnKind::signum: return "sgn(" + x(c.i) + ")";
    case ColumnKind::neg_exp: return "exp(-" + x(c.i) + ")";
    case ColumnKind::exp_product: return "exp(-" + x(c.i) + ")*" + x(c.j);
    case ColumnKind::absolute: return "abs(" + x(c.i) + ")";
    case ColumnKind::signed_quadratic: return x(c.i) + "*abs(" + x(c.j) + ")";
    case ColumnKind::sine: return "sin(" + x(c.i) + ")";
    case ColumnKind::cosine: return "cos(" + x(c.i) + ")";
    case ColumnKind::input: return "u" + std::to_string(c.i + 1);
  }
  return "?";
}

namespace detail {

/// Parses "X<n>" at the front of `s`, advancing it. Returns zero-based index.
inline std::optional<int> take_state(std::string_view& s) {
  if (s.empty() || s.front() != 'X') return std::nullopt;
  std::size_t n = 1;
  while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
  if (n == 1) return std::nullopt;
  const int idx = std::atoi(std::string(s.substr(1, n - 1)).c_str()) - 1;
  s.remove_prefix(n);
  return idx;
}

inline bool take(std::string_view& s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) return false;
  s.remove_prefix(prefix.size());
  return true;
}

inline std::optional<Column> parse_unary(std::string_view s, std::string_view head, ColumnKind kind) {
  if (!take(s, head)) return std::nullopt;
  auto idx = take_state(s);
  if (!idx || s != ")") return std::nullopt;
  return Column{kind, {}, *idx, 0};
}

}  // namespace detail

/// Inverse of column_label. `state_dim` sizes monomial exponent vectors.
inline Column parse_label(std::string_view label, int state_dim) {
  const auto fail = [&]() -> Column {
    throw ConfigError("cannot parse basis label '" + std::string(label) + "'");
  };
  const auto check = [&](const Column& c) {
    const bool binary = c.kind == ColumnKind::exp_product || c.kind == ColumnKind::signed_quadratic;
    if (c.kind != ColumnKind::input && c.kind != ColumnKind::constant && c.kind != ColumnKind::monomial) {
      if (c.i < 0 || c.i >= state_dim || (binary && (c.j < 0 || c.j >= state_dim))) fail();
    }
    return c;
  };
  if (label == "1") return Column{ColumnKind::constant, {}, 0, 0};
  if (label.size() > 1 && label.front() == 'u') {
    const std::string digits(label.substr(1));
    if (digits.find_first_not_of("0123456789") != std::string::npos) fail();
    return Column{ColumnKind::input, {}, std::atoi(digits.c_str()) - 1, 0};
  }
  using detail::parse_unary;
  for (auto [head, kind] : {std::pair{"sgn(", ColumnKind::signum}, std::pair{"abs(", ColumnKind::absolute},
                            std::pair{"sin(", ColumnKind::sine}, std::pair{"cos(", ColumnKind::cosine}}) {
    if (label.substr(0, 4) == head) {
      auto c = parse_unary(label, head, kind);
      if (!c) fail();
      return check(*c);
    }
  }
  if (label.substr(0, 5) == "exp(-") {
    std::string_view s = label.substr(5);
    auto a = detail::take_state(s);
    if (!a || !detail::take(s, ")")) fail();
    if (s.empty()) return check(Column{ColumnKind::neg_exp, {}, *a, 0});
    if (!detail::take(s, "*")) fail();
    auto b = detail::take_state(s);
    if (!b || !s.empty()) fail();
    return check(Column{ColumnKind::exp_product, {}, *a, *b});
  }
  // Xi*abs(Xj) or a monomial product of Xi^p factors.
  {
    std::string_view s = label;
    auto a = detail::take_state(s);
    if (a && detail::take(s, "*abs(")) {
      auto b = detail::take_state(s);
      if (!b || s != ")") fail();
      return check(Column{ColumnKind::signed_quadratic, {}, *a, *b});
    }
  }
  Column c{ColumnKind::monomial, std::vector<int>(static_cast<std::size_t>(state_dim), 0), 0, 0};
  std::string_view s = label;
  int last = -1;
  while (!s.empty()) {
    auto idx = detail::take_state(s);
    if (!idx || *idx < 0 || *idx >= state_dim || *idx <= last) fail();
    int p = 1;
    if (detail::take(s, "^")) {
      std::size_t n = 0;
      while (n < s.size() && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
      if (n == 0) fail();
      p = std::atoi(std::string(s.substr(0, n)).c_str());
      s.remove_prefix(n);
      if (p < 2) fail();
    }
    c.powers[static_cast<std::size_t>(*idx)] = p;
    last = *idx;
    if (!s.empty() && !detail::take(s, "*")) fail();
  }
  if (last < 0) fail();
  return c;
}

// ----------------------------------------------------------- enumeration

namespace detail {

/// Exponent vectors of total degree `degree` in `m` variables, graded-lex
/// order (X1 > X2 > ...): (2,0), (1,1), (0,2) for m = 2.
inline void monomials_of_degree(int m, int degree, std::vector<int>& prefix,
                                std::vector<std::vector<int>>& out) {
  const int pos = static_cast<int>(prefix.size());
  if (pos == m - 1) {
    prefix.push_back(degree);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int p = degree; p >= 0; --p) {
    prefix.push_back(p);
    monomials_of_degree(m, degree - p, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace detail

inline void validate(const LibrarySpec& spec) {
  if (spec.state_dim < 1) throw ConfigError("library state_dim must be >= 1");
  if (spec.max_degree < 1) throw ConfigError("library max_degree must be >= 1");
  if (spec.max_degree > kMaxPolynomialDegree)
    throw ConfigError("library max_degree " + std::to_string(spec.max_degree) + " exceeds the cap of " +
                      std::to_string(kMaxPolynomialDegree));
  if (spec.include_input && spec.input_dim < 1)
    throw ConfigError("include_input requires input_dim >= 1");
}

/// Full ordered column list: constant first, monomials in graded-lex order,
/// the remaining families in canonical order, input channels last.
inline std::vector<Column> enumerate_columns(const LibrarySpec& spec) {
  validate(spec);
  const int m = spec.state_dim;
  std::vector<Column> cols;
  if (spec.has(Family::constant)) cols.push_back({ColumnKind::constant, {}, 0, 0});
  if (spec.has(Family::multinomial)) {
    for (int p = 1; p <= spec.max_degree; ++p) {
      std::vector<std::vector<int>> exps;
      std::vector<int> prefix;
      detail::monomials_of_degree(m, p, prefix, exps);
      for (auto& e : exps) cols.push_back({ColumnKind::monomial, std::move(e), 0, 0});
    }
  }
  const auto unary = [&](Family f, ColumnKind k) {
    if (!spec.has(f)) return;
    for (int i = 0; i < m; ++i) cols.push_back({k, {}, i, 0});
  };
  const auto binary = [&](Family f, ColumnKind k) {
    if (!spec.has(f)) return;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) cols.push_back({k, {}, i, j});
  };
  unary(Family::signum, ColumnKind::signum);
  unary(Family::neg_exp, ColumnKind::neg_exp);
  binary(Family::exp_product, ColumnKind::exp_product);
  unary(Family::absolute, ColumnKind::absolute);
  binary(Family::signed_quadratic, ColumnKind::signed_quadratic);
  unary(Family::sine, ColumnKind::sine);
  unary(Family::cosine, ColumnKind::cosine);
  if (spec.include_input)
    for (int u = 0; u < spec.input_dim; ++u) cols.push_back({ColumnKind::input, {}, u, 0});

  if (!spec.exclude.empty()) {
    const std::set<std::string> drop(spec.exclude.begin(), spec.exclude.end());
    std::erase_if(cols, [&](const Column& c) { return drop.count(column_label(c)) > 0; });
  }
  return cols;
}

inline std::vector<std::string> column_labels(const LibrarySpec& spec) {
  std::vector<std::string> out;
  for (const auto& c : enumerate_columns(spec)) out.push_back(column_label(c));
  return out;
}

// ------------------------------------------------------------ evaluation

/// Value of one basis function at a single state (and input) sample.
template <class StateVec, class InputVec>
double evaluate_column(const Column& c, const StateVec& x, const InputVec& u) {
  switch (c.kind) {
    case ColumnKind::constant: return 1.0;
    case ColumnKind::monomial: {
      double v = 1.0;
      for (std::size_t s = 0; s < c.powers.size(); ++s)
        for (int p = 0; p < c.powers[s]; ++p) v *= x[static_cast<Eigen::Index>(s)];
      return v;
    }
    case ColumnKind::signum: {
      const double a = x[c.i];
      return static_cast<double>((a > 0.0) - (a < 0.0));
    }
    case ColumnKind::neg_exp: return std::exp(-x[c.i]);
    case ColumnKind::exp_product: return std::exp(-x[c.i]) * x[c.j];
    case ColumnKind::absolute: return std::abs(x[c.i]);
    case ColumnKind::signed_quadratic: return x[c.i] * std::abs(x[c.j]);
    case ColumnKind::sine: return std::sin(x[c.i]);
    case ColumnKind::cosine: return std::cos(x[c.i]);
    case ColumnKind::input: return u[c.i];
  }
  return 0.0;
}

struct LibraryMatrix {
  Eigen::MatrixXd values;  // N x K
  std::vector<std::string> column_labels;
  LibrarySpec spec;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// Evaluates every column of `spec` on each row of `states` (N x m) and the
/// optional `inputs` (N x n_u; required iff spec.include_input).
inline LibraryMatrix evaluate(const LibrarySpec& spec, const Eigen::MatrixXd& states,
                              const Eigen::MatrixXd* inputs = nullptr) {
  const auto cols = enumerate_columns(spec);
  if (states.cols() != spec.state_dim)
    throw DataError("library expects " + std::to_string(spec.state_dim) + " state columns, got " +
                    std::to_string(states.cols()));
  if (!states.allFinite()) throw DataError("non-finite state values passed to library evaluation");
  if (spec.include_input) {
    if (inputs == nullptr || inputs->cols() < spec.input_dim)
      throw DataError("library includes input columns but no matching inputs were given");
    if (inputs->rows() != states.rows()) throw DataError("input and state row counts differ");
    if (!inputs->allFinite()) throw DataError("non-finite input values passed to library evaluation");
  }
  const Eigen::Index n = states.rows();
  LibraryMatrix out;
  out.spec = spec;
  out.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (const auto& c : cols) out.column_labels.push_back(column_label(c));
  const Eigen::VectorXd no_input;
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::VectorXd x = states.row(r).transpose();
    const Eigen::VectorXd u = spec.include_input ? Eigen::VectorXd(inputs->row(r).transpose()) : no_input;
    for (std::size_t k = 0; k < cols.size(); ++k)
      out.values(r, static_cast<Eigen::Index>(k)) = evaluate_column(cols[k], x, u);
  }
  return out;
}

// --------------------------------------------------------------- presets

/// Every family at degree 6.
inline LibrarySpec full_library(int state_dim, int input_dim = 0) {
  LibrarySpec s;
  s.families = all_families();
  s.max_degree = 6;
  s.state_dim = state_dim;
  s.input_dim = input_dim;
  s.include_input = input_dim > 0;
  return s;
}

inline LibrarySpec polynomial_library(int state_dim, int degree, bool constant = true) {
  LibrarySpec s;
  if (constant) s.families.push_back(Family::constant);
  s.families.push_back(Family::multinomial);
  s.max_degree = degree;
  s.state_dim = state_dim;
  return s;
}

}  // namespace twinforge
