// core.hpp -- domain types, dataset ingestion, centering, and density
// evaluation for mixture-of-regressions models and their anchored variants.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchormix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, malformed files, infeasible sizes. The CLI maps this to
// exit code 2.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Failures of the numerics themselves (non-PD matrix, degenerate
// clustering, ...). The CLI maps this to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// log N(y; mean, var)
inline double log_normal_pdf(double y, double mean, double var) {
  if (!(var > 0.0)) throw InvalidInput("log_normal_pdf: variance must be positive");
  const double d = y - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + d * d / var);
}

// Stable log(sum_i exp(v_i)). Returns -inf for an empty or all -inf input.
inline double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;  // -inf stays -inf; +inf propagates
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// Observations for the regression mixture: response y (log brain mass when
// loaded with log_transform), design matrix x whose first column is all
// ones, and optional taxonomy labels parallel to the rows.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> species;
  std::vector<std::string> order;
  std::vector<std::string> suborder;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(x.cols()); }
  bool has_taxonomy() const { return !order.empty(); }

  void validate() const {
    if (y.size() < 1) throw InvalidInput("Dataset: n must be >= 1");
    if (x.rows() != y.size()) throw InvalidInput("Dataset: x rows must match y");
    if (!y.allFinite() || !x.allFinite())
      throw InvalidInput("Dataset: non-finite entries");
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (x(i, 0) != 1.0) throw InvalidInput("Dataset: first design column must be 1");
  }
};

// Subtracts the mean; the result has mean zero to machine precision.
inline Eigen::VectorXd center_predictor(const Eigen::VectorXd& col) {
  if (col.size() == 0) throw InvalidInput("center_predictor: empty vector");
  if (!col.allFinite()) throw InvalidInput("center_predictor: non-finite entries");
  return col.array() - col.mean();
}

// Component-specific parameters of the k-component mixture of regressions:
// one coefficient vector per component, a shared residual variance, and the
// mixture weights.
struct MixRegParams {
  std::vector<Eigen::VectorXd> beta;
  double sigma2 = 1.0;
  Eigen::VectorXd eta;

  int k() const { return static_cast<int>(beta.size()); }

  void validate(int p) const {
    if (beta.empty()) throw InvalidInput("MixRegParams: need at least one component");
    for (const auto& b : beta)
      if (b.size() != p || !b.allFinite())
        throw InvalidInput("MixRegParams: bad coefficient vector");
    if (!(sigma2 > 0.0)) throw InvalidInput("MixRegParams: sigma2 must be positive");
    if (eta.size() != k()) throw InvalidInput("MixRegParams: eta size mismatch");
    if (eta.minCoeff() < 0.0 || std::abs(eta.sum() - 1.0) > 1e-12)
      throw InvalidInput("MixRegParams: eta must lie on the simplex");
  }
};

// Exchangeable prior for the regression mixture: beta_j ~ N(mu_beta, diag(v))
// iid, 1/sigma2 ~ Gamma(a, b) with mean a/b, eta ~ Dirichlet(alpha * 1_k).
struct RegPrior {
  Eigen::VectorXd mu_beta;
  Eigen::VectorXd v;
  double a = 5.0;
  double b = 1.0;
  double alpha = 1.0;

  void validate(int p) const {
    if (mu_beta.size() != p || v.size() != p)
      throw InvalidInput("RegPrior: dimension mismatch");
    if (v.minCoeff() <= 0.0) throw InvalidInput("RegPrior: prior variances must be positive");
    if (!(a > 0.0) || !(b > 0.0) || !(alpha > 0.0))
      throw InvalidInput("RegPrior: a, b, alpha must be positive");
  }
};

// Index sets A_1..A_k of observations pre-assigned to each component. Sets
// must be pairwise disjoint and in range; identifiability of the labeling
// additionally wants at least k-1 nonempty sets, which is a property of the
// anchored model rather than of the container, so it is exposed as a query.
struct AnchorSet {
  std::vector<std::vector<int>> sets;

  int k() const { return static_cast<int>(sets.size()); }
  std::vector<int> m() const {
    std::vector<int> out(sets.size());
    for (size_t j = 0; j < sets.size(); ++j) out[j] = static_cast<int>(sets[j].size());
    return out;
  }
  int total() const {
    int t = 0;
    for (const auto& s : sets) t += static_cast<int>(s.size());
    return t;
  }
  bool empty() const { return total() == 0; }

  bool identifiable() const {
    int nonempty = 0;
    for (const auto& s : sets) nonempty += !s.empty();
    return nonempty >= k() - 1;
  }

  // -1 when unanchored, else the component the observation is anchored to.
  std::vector<int> component_of(int n) const {
    std::vector<int> comp(n, -1);
    for (int j = 0; j < k(); ++j)
      for (int i : sets[j]) {
        if (i < 0 || i >= n) throw InvalidInput("AnchorSet: index out of range");
        if (comp[i] != -1) throw InvalidInput("AnchorSet: sets must be disjoint");
        comp[i] = j;
      }
    return comp;
  }

  void validate(int n) const { (void)component_of(n); }
};

// Row-stochastic n x k matrix of allocation probabilities. After an anchor
// step the rows of anchored observations are exact one-hot vectors.
struct Responsibilities {
  Eigen::MatrixXd r;

  int n() const { return static_cast<int>(r.rows()); }
  int k() const { return static_cast<int>(r.cols()); }

  void validate() const {
    if (r.rows() < 1 || r.cols() < 1) throw InvalidInput("Responsibilities: empty");
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      if (r.row(i).minCoeff() < 0.0 || r.row(i).maxCoeff() > 1.0 ||
          std::abs(r.row(i).sum() - 1.0) > 1e-12)
        throw InvalidInput("Responsibilities: rows must be probability vectors");
    }
  }
};

// log f(y | X, beta, sigma2, eta) = sum_i log sum_j eta_j phi(y_i; x_i beta_j, sigma2),
// accumulated through log-sum-exp.
inline double mixreg_loglik(const Dataset& data, const MixRegParams& params) {
  params.validate(data.p());
  const int n = data.n(), k = params.k();
  Eigen::VectorXd terms(k);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const double mean = data.x.row(i).dot(params.beta[j]);
      terms[j] = params.eta[j] > 0.0
                     ? std::log(params.eta[j]) + log_normal_pdf(data.y[i], mean, params.sigma2)
                     : -std::numeric_limits<double>::infinity();
    }
    total += log_sum_exp(terms);
  }
  return total;
}

// Anchored log likelihood: observations in A_j contribute the single
// component-j density with no mixture weight; the rest contribute the
// mixture term. Empty anchors reduce this to mixreg_loglik.
inline double anchored_loglik(const Dataset& data, const MixRegParams& params,
                              const AnchorSet& anchors) {
  params.validate(data.p());
  if (anchors.k() != params.k())
    throw InvalidInput("anchored_loglik: anchor sets must match component count");
  const std::vector<int> comp = anchors.component_of(data.n());
  const int k = params.k();
  Eigen::VectorXd terms(k);
  double total = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (comp[i] >= 0) {
      const double mean = data.x.row(i).dot(params.beta[comp[i]]);
      total += log_normal_pdf(data.y[i], mean, params.sigma2);
      continue;
    }
    for (int j = 0; j < k; ++j) {
      const double mean = data.x.row(i).dot(params.beta[j]);
      terms[j] = params.eta[j] > 0.0
                     ? std::log(params.eta[j]) + log_normal_pdf(data.y[i], mean, params.sigma2)
                     : -std::numeric_limits<double>::infinity();
    }
    total += log_sum_exp(terms);
  }
  return total;
}

namespace detail {

// Splits one CSV record, honoring double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_mass(const std::string& field, int row, const char* name) {
  try {
    size_t pos = 0;
    const double value = std::stod(field, &pos);
    while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
    if (pos != field.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(value)) throw std::invalid_argument("non-finite");
    return value;
  } catch (const std::exception&) {
    throw InvalidInput("load_dataset: malformed " + std::string(name) + " in data row " +
                       std::to_string(row) + ": '" + field + "'");
  }
}

}  // namespace detail

// Reads a species,order,suborder,body_mass,brain_mass CSV (UTF-8, header
// required, masses in grams). With log_transform the response becomes
// ln(brain_mass) and the predictor ln(body_mass); with center the predictor
// column is mean-adjusted. Leading '#' lines are treated as comments.
inline Dataset load_dataset(const std::filesystem::path& path, bool log_transform = true,
                            bool center = true) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("load_dataset: cannot open " + path.string());

  std::string line;
  do {
    if (!std::getline(in, line)) throw InvalidInput("load_dataset: missing header");
  } while (!line.empty() && line[0] == '#');

  const std::vector<std::string> header = detail::split_csv_record(line);
  auto col = [&](const std::string& name) {
    for (size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return static_cast<int>(c);
    throw InvalidInput("load_dataset: missing column '" + name + "'");
  };
  const int c_species = col("species"), c_order = col("order"), c_suborder = col("suborder");
  const int c_body = col("body_mass"), c_brain = col("brain_mass");

  std::vector<std::string> species, order, suborder;
  std::vector<double> body, brain;
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++row;
    const std::vector<std::string> f = detail::split_csv_record(line);
    if (static_cast<int>(f.size()) != static_cast<int>(header.size()))
      throw InvalidInput("load_dataset: data row " + std::to_string(row) + " has " +
                         std::to_string(f.size()) + " fields, expected " +
                         std::to_string(header.size()));
    species.push_back(f[c_species]);
    order.push_back(f[c_order]);
    suborder.push_back(f[c_suborder]);
    body.push_back(detail::parse_mass(f[c_body], row, "body_mass"));
    brain.push_back(detail::parse_mass(f[c_brain], row, "brain_mass"));
  }
  const int n = row;
  if (n < 1) throw InvalidInput("load_dataset: no data rows");

  Dataset data;
  data.y.resize(n);
  Eigen::VectorXd x2(n);
  for (int i = 0; i < n; ++i) {
    if (log_transform && (body[i] <= 0.0 || brain[i] <= 0.0))
      throw InvalidInput("load_dataset: non-positive mass in data row " + std::to_string(i + 1) +
                         "; logarithm undefined");
    data.y[i] = log_transform ? std::log(brain[i]) : brain[i];
    x2[i] = log_transform ? std::log(body[i]) : body[i];
  }
  if (center) x2 = center_predictor(x2);

  data.x.resize(n, 2);
  data.x.col(0).setOnes();
  data.x.col(1) = x2;
  data.species = std::move(species);
  data.order = std::move(order);
  data.suborder = std::move(suborder);
  data.validate();
  return data;
}

}  // namespace anchormix
