// em_anchor.hpp -- the anchored EM algorithm: E step on the latent
// allocations, an anchor step that pins the best-scoring observations to
// each component, and MAP M steps for two concrete models (mixture of
// regressions, multivariate Gaussian mixture).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "anchormix/core.hpp"
#include "anchormix/numerics.hpp"

namespace anchormix {

// Parameters of a k-component p-variate Gaussian mixture.
struct MvnMixParams {
  std::vector<Eigen::VectorXd> theta;
  std::vector<Eigen::MatrixXd> sigma;
  Eigen::VectorXd eta;

  int k() const { return static_cast<int>(theta.size()); }

  void validate(int p) const {
    if (theta.empty() || sigma.size() != theta.size())
      throw InvalidInput("MvnMixParams: component count mismatch");
    for (const auto& t : theta)
      if (t.size() != p || !t.allFinite()) throw InvalidInput("MvnMixParams: bad mean");
    for (const auto& s : sigma) {
      if (s.rows() != p || s.cols() != p || !s.allFinite())
        throw InvalidInput("MvnMixParams: bad covariance");
      Eigen::LLT<Eigen::MatrixXd> llt(s);
      if (llt.info() != Eigen::Success)
        throw InvalidInput("MvnMixParams: covariance not positive definite");
    }
    if (eta.size() != k() || eta.minCoeff() < 0.0 || std::abs(eta.sum() - 1.0) > 1e-12)
      throw InvalidInput("MvnMixParams: eta must lie on the simplex");
  }
};

// Conjugate normal-Wishart prior for the Gaussian mixture components:
// theta_j | Sigma_j ~ N(mu, kappa^-1 Sigma_j), Sigma_j^-1 ~ Wishart(nu, W).
struct MvnPrior {
  Eigen::VectorXd mu;
  double kappa = 1.25;
  Eigen::MatrixXd w;
  double nu = 2.0;
  double alpha = 1.0;

  void validate(int p) const {
    if (mu.size() != p) throw InvalidInput("MvnPrior: mu dimension mismatch");
    if (!(kappa > 0.0)) throw InvalidInput("MvnPrior: kappa must be positive");
    if (w.rows() != p || w.cols() != p) throw InvalidInput("MvnPrior: W dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(w);
    if (llt.info() != Eigen::Success) throw InvalidInput("MvnPrior: W must be positive definite");
    if (!(alpha > 0.0)) throw InvalidInput("MvnPrior: alpha must be positive");
  }
};

// One EM run: the objective E_q log p(gamma, eta, s | y) per iteration (the
// additive constant log p(y) is dropped throughout), the anchors and
// parameters of the final iteration.
template <typename ParamsT>
struct EmTrace {
  std::vector<double> objective;
  int iterations = 0;
  bool converged = false;
  AnchorSet anchors;
  ParamsT params;

  double final_objective() const { return objective.back(); }
};

struct EmOptions {
  int n_starts = 10;
  int max_iter = 500;
  double tol = 1e-8;
  // The algorithm re-anchors every iteration; freezing the anchor sets
  // after the first iteration turns the loop into exact EM for the anchored
  // model, which is the mode with a monotonicity guarantee.
  bool reanchor_each_iteration = true;
};

namespace detail {

inline double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double log_dirichlet_sym_pdf(const Eigen::VectorXd& eta, double alpha) {
  const int k = static_cast<int>(eta.size());
  double s = std::lgamma(alpha * k) - k * std::lgamma(alpha);
  for (int j = 0; j < k; ++j) {
    if (eta[j] <= 0.0)
      return alpha == 1.0 ? s : (alpha > 1.0 ? -std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::infinity());
    s += (alpha - 1.0) * std::log(eta[j]);
  }
  return s;
}

inline double log_diag_normal_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                                  const Eigen::VectorXd& var) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += log_normal_pdf(x[i], mean[i], var[i]);
  return s;
}

inline double log_mvn_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                          const Eigen::MatrixXd& cov) {
  const int p = static_cast<int>(x.size());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("log_mvn_pdf: covariance not PD");
  const Eigen::VectorXd half = llt.matrixL().solve(x - mean);
  double logdet = 0.0;
  for (int i = 0; i < p; ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * (p * kLogTwoPi + half.squaredNorm()) - logdet;
}

inline double log_multi_gamma(int p, double a) {
  double s = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int i = 1; i <= p; ++i) s += std::lgamma(a + 0.5 * (1 - i));
  return s;
}

// Density of the precision Lambda = Sigma^-1 under Wishart(nu, W), evaluated
// from the stored covariance.
inline double log_wishart_precision_pdf(const Eigen::MatrixXd& sigma, double nu,
                                        const Eigen::MatrixXd& w) {
  const int p = static_cast<int>(sigma.rows());
  Eigen::LLT<Eigen::MatrixXd> llt_s(sigma), llt_w(w);
  if (llt_s.info() != Eigen::Success || llt_w.info() != Eigen::Success)
    throw NumericError("log_wishart_precision_pdf: matrix not PD");
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd lambda = llt_s.solve(identity);
  double logdet_lambda = 0.0, logdet_w = 0.0;
  for (int i = 0; i < p; ++i) {
    logdet_lambda -= 2.0 * std::log(llt_s.matrixL()(i, i));
    logdet_w += 2.0 * std::log(llt_w.matrixL()(i, i));
  }
  const double trace = (llt_w.solve(identity) * lambda).trace();
  return 0.5 * (nu - p - 1) * logdet_lambda - 0.5 * trace - 0.5 * nu * p * std::log(2.0) -
         0.5 * nu * logdet_w - log_multi_gamma(p, 0.5 * nu);
}

// Mixture-weight update as printed: eta_j = (sum_i r_ij + alpha - 1) over
// (sum_l sum_i r_il + alpha - 1). For alpha = 1 this is the exact simplex
// maximizer; for alpha != 1 the printed denominator does not normalize, so
// the result is projected back (clamp at the boundary, rescale), which is
// the KKT-constrained maximizer.
inline Eigen::VectorXd eta_update(const Eigen::MatrixXd& rt, double alpha) {
  const double denom = rt.sum() + alpha - 1.0;
  if (!(denom > 0.0)) throw NumericError("eta update: nonpositive denominator");
  Eigen::VectorXd eta = (rt.colwise().sum().array() + alpha - 1.0) / denom;
  eta = eta.cwiseMax(0.0);
  const double s = eta.sum();
  if (!(s > 0.0)) throw NumericError("eta update: all weights vanished");
  return eta / s;
}

}  // namespace detail

// Mixture-of-regressions E step: r_ij = eta_j phi(y_i; x_i beta_j, sigma2)
// normalized per row, evaluated in log space.
inline Responsibilities em_reg_estep(const Dataset& data, const MixRegParams& params) {
  params.validate(data.p());
  const int n = data.n(), k = params.k();
  Responsibilities out;
  out.r.resize(n, k);
  Eigen::MatrixXd mean(n, k);
  for (int j = 0; j < k; ++j) mean.col(j) = data.x * params.beta[j];
  Eigen::VectorXd lw(k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j)
      lw[j] = params.eta[j] > 0.0
                  ? std::log(params.eta[j]) + log_normal_pdf(data.y[i], mean(i, j), params.sigma2)
                  : -std::numeric_limits<double>::infinity();
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse)) throw NumericError("em_reg_estep: non-finite row density");
    out.r.row(i) = (lw.array() - lse).exp();
    out.r.row(i) /= out.r.row(i).sum();
  }
  return out;
}

// Pins the anchor rows of r to one-hot vectors, leaving the rest unchanged.
inline Responsibilities apply_anchors(const Responsibilities& r, const AnchorSet& anchors) {
  if (anchors.k() != r.k()) throw InvalidInput("apply_anchors: component count mismatch");
  anchors.validate(r.n());
  Responsibilities out = r;
  for (int j = 0; j < anchors.k(); ++j)
    for (int i : anchors.sets[j]) {
      out.r.row(i).setZero();
      out.r(i, j) = 1.0;
    }
  return out;
}

// Anchor step: choose disjoint sets of the requested sizes maximizing the
// total responsibility captured, then return the anchored responsibilities.
inline std::pair<AnchorSet, Responsibilities> anchor_step(const Responsibilities& r,
                                                          const std::vector<int>& m) {
  AnchorSet anchors = assign_anchors(r, m);
  Responsibilities rt = apply_anchors(r, anchors);
  return {std::move(anchors), std::move(rt)};
}

// MAP M step for the regression mixture. R_j = diag of column j of the
// anchored responsibilities; sigma^-2 uses the updated coefficients.
inline MixRegParams em_reg_mstep(const Dataset& data, const Responsibilities& rt,
                                 const RegPrior& prior) {
  const int n = data.n(), p = data.p(), k = rt.k();
  if (rt.n() != n) throw InvalidInput("em_reg_mstep: dimension mismatch");
  prior.validate(p);

  const Eigen::VectorXd v_inv = prior.v.cwiseInverse();
  MixRegParams params;
  params.beta.resize(k);
  double wrss = 0.0;
  for (int j = 0; j < k; ++j) {
    const Eigen::ArrayXd w = rt.r.col(j).array();
    const Eigen::MatrixXd xw = data.x.array().colwise() * w;
    Eigen::MatrixXd a = data.x.transpose() * xw;
    a.diagonal() += v_inv;
    const Eigen::VectorXd rhs = xw.transpose() * data.y + v_inv.cwiseProduct(prior.mu_beta);
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
      throw NumericError("em_reg_mstep: normal equations not PD");
    params.beta[j] = llt.solve(rhs);
    const Eigen::VectorXd resid = data.y - data.x * params.beta[j];
    wrss += (w * resid.array().square()).sum();
  }
  const double numer = prior.a + 0.5 * n - 1.0;
  if (!(numer > 0.0)) throw NumericError("em_reg_mstep: MAP precision update nonpositive");
  params.sigma2 = (prior.b + 0.5 * wrss) / numer;
  params.eta = detail::eta_update(rt.r, prior.alpha);
  return params;
}

// (y_i, x_{2i}, ..., x_{pi}): the response joined with the non-intercept
// predictors, the coordinates the Gaussian-mixture anchoring works in.
inline Eigen::MatrixXd make_z(const Dataset& data) {
  Eigen::MatrixXd z(data.n(), data.p());
  z.col(0) = data.y;
  if (data.p() > 1) z.rightCols(data.p() - 1) = data.x.rightCols(data.p() - 1);
  return z;
}

inline Responsibilities em_mvn_estep(const Eigen::MatrixXd& z, const MvnMixParams& params) {
  const int n = static_cast<int>(z.rows()), p = static_cast<int>(z.cols());
  params.validate(p);
  const int k = params.k();

  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt(k);
  Eigen::VectorXd logdet(k);
  for (int j = 0; j < k; ++j) {
    llt[j].compute(params.sigma[j]);
    if (llt[j].info() != Eigen::Success)
      throw NumericError("em_mvn_estep: covariance not PD");
    double ld = 0.0;
    for (int i = 0; i < p; ++i) ld += std::log(llt[j].matrixL()(i, i));
    logdet[j] = ld;
  }

  Responsibilities out;
  out.r.resize(n, k);
  Eigen::VectorXd lw(k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      if (params.eta[j] <= 0.0) {
        lw[j] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const Eigen::VectorXd half = llt[j].matrixL().solve(z.row(i).transpose() - params.theta[j]);
      lw[j] = std::log(params.eta[j]) - 0.5 * (p * kLogTwoPi + half.squaredNorm()) - logdet[j];
    }
    const double lse = log_sum_exp(lw);
    if (!std::isfinite(lse)) throw NumericError("em_mvn_estep: non-finite row density");
    out.r.row(i) = (lw.array() - lse).exp();
    out.r.row(i) /= out.r.row(i).sum();
  }
  return out;
}

// M step for the Gaussian mixture, exactly as printed (the kappa^-1 factors
// appear where the printed updates put them); the covariance is symmetrized
// after the update.
inline MvnMixParams em_mvn_mstep(const Eigen::MatrixXd& z, const Responsibilities& rt,
                                 const MvnPrior& prior) {
  const int n = static_cast<int>(z.rows()), p = static_cast<int>(z.cols());
  if (rt.n() != n) throw InvalidInput("em_mvn_mstep: dimension mismatch");
  prior.validate(p);
  const int k = rt.k();
  const double kinv = 1.0 / prior.kappa;
  const Eigen::MatrixXd w_inv =
      Eigen::LLT<Eigen::MatrixXd>(prior.w).solve(Eigen::MatrixXd::Identity(p, p));

  MvnMixParams params;
  params.theta.resize(k);
  params.sigma.resize(k);
  for (int j = 0; j < k; ++j) {
    const double rsum = rt.r.col(j).sum();
    const double denom = prior.nu - p + rsum;
    if (!(denom > 0.0))
      throw NumericError("em_mvn_mstep: nonpositive covariance denominator for component " +
                         std::to_string(j));
    Eigen::VectorXd zbar = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < n; ++i) zbar += rt.r(i, j) * z.row(i).transpose();
    params.theta[j] = (kinv * prior.mu + zbar) / (kinv + rsum);

    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i) {
      if (rt.r(i, j) == 0.0) continue;
      const Eigen::VectorXd d = z.row(i).transpose() - params.theta[j];
      scatter += rt.r(i, j) * d * d.transpose();
    }
    const Eigen::VectorXd dm = prior.mu - params.theta[j];
    Eigen::MatrixXd sigma = (w_inv + scatter + kinv * dm * dm.transpose()) / denom;
    params.sigma[j] = 0.5 * (sigma + sigma.transpose());
  }
  params.eta = detail::eta_update(rt.r, prior.alpha);
  return params;
}

// E_q log p(gamma, eta, s | y) for the regression mixture, dropping the
// log p(y) constant: expected complete-data log likelihood plus the log
// prior densities.
inline double em_objective(const Dataset& data, const Responsibilities& rt,
                           const MixRegParams& params, const RegPrior& prior) {
  params.validate(data.p());
  prior.validate(data.p());
  const int n = data.n(), k = params.k();
  if (rt.n() != n || rt.k() != k) throw InvalidInput("em_objective: dimension mismatch");

  double s = 0.0;
  for (int j = 0; j < k; ++j) {
    const Eigen::VectorXd mean = data.x * params.beta[j];
    const double log_eta = params.eta[j] > 0.0 ? std::log(params.eta[j])
                                               : -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double w = rt.r(i, j);
      if (w == 0.0) continue;
      s += w * (log_normal_pdf(data.y[i], mean[i], params.sigma2) + log_eta);
    }
  }
  for (int j = 0; j < k; ++j)
    s += detail::log_diag_normal_pdf(params.beta[j], prior.mu_beta, prior.v);
  s += detail::log_gamma_pdf(1.0 / params.sigma2, prior.a, prior.b);
  s += detail::log_dirichlet_sym_pdf(params.eta, prior.alpha);
  return s;
}

// Gaussian-mixture counterpart; the component prior is N(mu, kappa^-1
// Sigma_j) times a Wishart on the precision, as stated for the model.
inline double em_objective(const Eigen::MatrixXd& z, const Responsibilities& rt,
                           const MvnMixParams& params, const MvnPrior& prior) {
  const int n = static_cast<int>(z.rows()), p = static_cast<int>(z.cols());
  params.validate(p);
  prior.validate(p);
  const int k = params.k();
  if (rt.n() != n || rt.k() != k) throw InvalidInput("em_objective: dimension mismatch");

  double s = 0.0;
  for (int j = 0; j < k; ++j) {
    const double log_eta = params.eta[j] > 0.0 ? std::log(params.eta[j])
                                               : -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double w = rt.r(i, j);
      if (w == 0.0) continue;
      s += w * (detail::log_mvn_pdf(z.row(i).transpose(), params.theta[j], params.sigma[j]) +
                log_eta);
    }
  }
  for (int j = 0; j < k; ++j) {
    s += detail::log_mvn_pdf(params.theta[j], prior.mu, params.sigma[j] / prior.kappa);
    s += detail::log_wishart_precision_pdf(params.sigma[j], prior.nu, prior.w);
  }
  s += detail::log_dirichlet_sym_pdf(params.eta, prior.alpha);
  return s;
}

// Model policies for the generic anchored EM loop.

class RegMixModel {
 public:
  using Params = MixRegParams;

  RegMixModel(const Dataset& data, const RegPrior& prior) : data_(data), prior_(prior) {
    data.validate();
    prior.validate(data.p());
  }

  int n() const { return data_.n(); }

  // Seeds each component with a prior-regularized fit to the neighborhood
  // of a randomly drawn observation.
  Params init(int k, RngStream& rng) const {
    const int n = data_.n(), p = data_.p();
    const std::vector<int> seeds = rng.sample_distinct(n, k);
    const int q = std::min(n, std::max(p + 2, 10));
    const Eigen::VectorXd v_inv = prior_.v.cwiseInverse();

    Params params;
    params.beta.resize(k);
    for (int j = 0; j < k; ++j) {
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      const Eigen::RowVectorXd center = data_.x.row(seeds[j]);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return (data_.x.row(a) - center).squaredNorm() < (data_.x.row(b) - center).squaredNorm();
      });
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd rhs = v_inv.cwiseProduct(prior_.mu_beta);
      a.diagonal() += v_inv;
      for (int t = 0; t < q; ++t) {
        const Eigen::VectorXd xi = data_.x.row(idx[t]).transpose();
        a += xi * xi.transpose();
        rhs += xi * data_.y[idx[t]];
      }
      params.beta[j] = Eigen::LLT<Eigen::MatrixXd>(a).solve(rhs);
    }
    const double var =
        n > 1 ? (data_.y.array() - data_.y.mean()).square().sum() / (n - 1) : prior_.b / prior_.a;
    params.sigma2 = std::max(var, 1e-8);
    params.eta = Eigen::VectorXd::Constant(k, 1.0 / k);
    return params;
  }

  Responsibilities estep(const Params& params) const { return em_reg_estep(data_, params); }
  Params mstep(const Responsibilities& rt) const { return em_reg_mstep(data_, rt, prior_); }
  double objective(const Responsibilities& rt, const Params& params) const {
    return em_objective(data_, rt, params, prior_);
  }

 private:
  const Dataset& data_;
  const RegPrior& prior_;
};

class MvnMixModel {
 public:
  using Params = MvnMixParams;

  MvnMixModel(const Eigen::MatrixXd& z, const MvnPrior& prior) : z_(z), prior_(prior) {
    prior.validate(static_cast<int>(z.cols()));
  }

  int n() const { return static_cast<int>(z_.rows()); }

  Params init(int k, RngStream& rng) const {
    const int n = static_cast<int>(z_.rows()), p = static_cast<int>(z_.cols());
    const std::vector<int> seeds = rng.sample_distinct(n, k);
    Eigen::MatrixXd cov;
    if (n > 1) {
      const Eigen::MatrixXd centered = z_.rowwise() - z_.colwise().mean();
      cov = centered.transpose() * centered / (n - 1);
    } else {
      cov = Eigen::MatrixXd::Identity(p, p);
    }
    cov.diagonal().array() += 1e-8 * std::max(1.0, cov.trace());

    Params params;
    params.theta.resize(k);
    params.sigma.assign(k, cov);
    for (int j = 0; j < k; ++j) params.theta[j] = z_.row(seeds[j]).transpose();
    params.eta = Eigen::VectorXd::Constant(k, 1.0 / k);
    return params;
  }

  Responsibilities estep(const Params& params) const { return em_mvn_estep(z_, params); }
  Params mstep(const Responsibilities& rt) const { return em_mvn_mstep(z_, rt, prior_); }
  double objective(const Responsibilities& rt, const Params& params) const {
    return em_objective(z_, rt, params, prior_);
  }

 private:
  const Eigen::MatrixXd& z_;
  const MvnPrior& prior_;
};

// One EM run from an explicit initialization: iterate E step, anchor step,
// M step until the objective change falls below tol.
template <class Model>
EmTrace<typename Model::Params> anchored_em_from(const Model& model, const std::vector<int>& m,
                                                 typename Model::Params params,
                                                 const EmOptions& opt) {
  if (opt.max_iter < 1) throw InvalidInput("anchored_em_from: max_iter must be >= 1");
  EmTrace<typename Model::Params> trace;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int iter = 0; iter < opt.max_iter; ++iter) {
    const Responsibilities r = model.estep(params);
    Responsibilities rt;
    if (iter == 0 || opt.reanchor_each_iteration) {
      auto [anchors, anchored] = anchor_step(r, m);
      trace.anchors = std::move(anchors);
      rt = std::move(anchored);
    } else {
      rt = apply_anchors(r, trace.anchors);
    }
    params = model.mstep(rt);
    const double obj = model.objective(rt, params);
    trace.objective.push_back(obj);
    trace.iterations = iter + 1;
    if (iter > 0 && std::abs(obj - prev) < opt.tol) {
      trace.converged = true;
      break;
    }
    prev = obj;
  }
  trace.params = std::move(params);
  return trace;
}

// Multi-start anchored EM: runs n_starts times from random initializations
// on seed-split streams and keeps the run with the largest ending
// objective.
template <class Model>
EmTrace<typename Model::Params> run_anchored_em(const Model& model, int k,
                                                const std::vector<int>& m, const EmOptions& opt,
                                                RngStream& rng) {
  if (opt.n_starts < 1) throw InvalidInput("run_anchored_em: n_starts must be >= 1");
  if (static_cast<int>(m.size()) != k)
    throw InvalidInput("run_anchored_em: m must have one entry per component");

  const RngStream base(rng.raw());
  EmTrace<typename Model::Params> best;
  bool have_best = false;
  for (int s = 0; s < opt.n_starts; ++s) {
    RngStream child = base.split(static_cast<std::uint64_t>(s));
    auto trace = anchored_em_from(model, m, model.init(k, child), opt);
    if (!have_best || trace.final_objective() > best.final_objective()) {
      best = std::move(trace);
      have_best = true;
    }
  }
  return best;
}

inline EmTrace<MixRegParams> run_anchored_em_reg(const Dataset& data, const RegPrior& prior, int k,
                                                 const std::vector<int>& m, const EmOptions& opt,
                                                 RngStream& rng) {
  return run_anchored_em(RegMixModel(data, prior), k, m, opt, rng);
}

inline EmTrace<MvnMixParams> run_anchored_em_mvn(const Eigen::MatrixXd& z, const MvnPrior& prior,
                                                 int k, const std::vector<int>& m,
                                                 const EmOptions& opt, RngStream& rng) {
  return run_anchored_em(MvnMixModel(z, prior), k, m, opt, rng);
}

}  // namespace anchormix
