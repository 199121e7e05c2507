// gibbs.hpp -- Gibbs sampler for the anchored mixture-of-regressions
// posterior, MAP allocations and posterior-mean component lines, a
// label-switch diagnostic, and the taxonomy cross-tabulation.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "anchormix/core.hpp"
#include "anchormix/numerics.hpp"

namespace anchormix {

// Retained MCMC draws (burn-in already discarded). beta stores one draw per
// row, components concatenated: [beta_1', ..., beta_k'].
struct PosteriorChain {
  int k = 0, p = 0, n = 0;
  Eigen::MatrixXd beta;    // draws x (k*p)
  Eigen::VectorXd sigma2;  // draws
  Eigen::MatrixXd eta;     // draws x k
  Eigen::MatrixXi s;       // draws x n
  std::uint64_t seed = 0;
  int burn_in = 0;
  AnchorSet anchors;

  int draws() const { return static_cast<int>(sigma2.size()); }
  double beta_at(int draw, int comp, int coef) const { return beta(draw, comp * p + coef); }
};

struct GibbsOptions {
  int n_samples = 20000;
  int burn_in = 2000;
  // Whether anchored observations contribute to the Dirichlet counts of the
  // eta full conditional. Under the marginalized anchored likelihood they
  // carry no eta factor, so both variants are defensible; the default
  // counts them.
  bool eta_counts_include_anchored = true;
};

// Systematic-scan Gibbs for the anchored mixture of regressions. Anchored
// observations keep their component through every draw; empty components
// fall back to the prior conditional automatically (their precision term is
// just V^-1).
inline PosteriorChain gibbs_anchored_mixreg(const Dataset& data, const AnchorSet& anchors,
                                            const RegPrior& prior, int k,
                                            const GibbsOptions& opt, RngStream& rng) {
  data.validate();
  const int n = data.n(), p = data.p();
  prior.validate(p);
  if (k < 1) throw InvalidInput("gibbs_anchored_mixreg: k must be >= 1");
  if (anchors.k() != k)
    throw InvalidInput("gibbs_anchored_mixreg: anchor sets must match component count");
  if (opt.n_samples < 1 || opt.burn_in < 0)
    throw InvalidInput("gibbs_anchored_mixreg: bad chain lengths");
  const std::vector<int> anchored_comp = anchors.component_of(n);

  const Eigen::VectorXd v_inv = prior.v.cwiseInverse();
  const Eigen::VectorXd v_inv_mu = v_inv.cwiseProduct(prior.mu_beta);

  // initial state from the prior
  std::vector<Eigen::VectorXd> beta(k);
  for (int j = 0; j < k; ++j) {
    beta[j].resize(p);
    for (int c = 0; c < p; ++c) beta[j][c] = rng.normal(prior.mu_beta[c], prior.v[c]);
  }
  double tau = rng.gamma(prior.a, prior.b);
  Eigen::VectorXd eta = rng.dirichlet(Eigen::VectorXd::Constant(k, prior.alpha));
  std::vector<int> s(n, 0);
  for (int i = 0; i < n; ++i)
    if (anchored_comp[i] >= 0) s[i] = anchored_comp[i];

  PosteriorChain chain;
  chain.k = k;
  chain.p = p;
  chain.n = n;
  chain.beta.resize(opt.n_samples, k * p);
  chain.sigma2.resize(opt.n_samples);
  chain.eta.resize(opt.n_samples, k);
  chain.s.resize(opt.n_samples, n);
  chain.seed = rng.seed();
  chain.burn_in = opt.burn_in;
  chain.anchors = anchors;

  Eigen::VectorXd lw(k), probs(k), z(p);
  Eigen::MatrixXd mean(n, k);
  for (int t = 0; t < opt.burn_in + opt.n_samples; ++t) {
    // s | beta, sigma2, eta
    for (int j = 0; j < k; ++j) mean.col(j) = data.x * beta[j];
    const double sigma2 = 1.0 / tau;
    for (int i = 0; i < n; ++i) {
      if (anchored_comp[i] >= 0) continue;
      for (int j = 0; j < k; ++j)
        lw[j] = eta[j] > 0.0
                    ? std::log(eta[j]) + log_normal_pdf(data.y[i], mean(i, j), sigma2)
                    : -std::numeric_limits<double>::infinity();
      const double lse = log_sum_exp(lw);
      if (!std::isfinite(lse)) throw NumericError("gibbs_anchored_mixreg: non-finite density");
      probs = (lw.array() - lse).exp();
      probs /= probs.sum();
      s[i] = rng.categorical(probs);
    }

    // beta_j | s, sigma2
    for (int j = 0; j < k; ++j) {
      Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
      for (int i = 0; i < n; ++i) {
        if (s[i] != j) continue;
        const Eigen::VectorXd xi = data.x.row(i).transpose();
        xtx += xi * xi.transpose();
        xty += xi * data.y[i];
      }
      Eigen::MatrixXd a = tau * xtx;
      a.diagonal() += v_inv;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() != Eigen::Success)
        throw NumericError("gibbs_anchored_mixreg: precision not PD");
      const Eigen::VectorXd bmean = llt.solve(tau * xty + v_inv_mu);
      for (int c = 0; c < p; ++c) z[c] = rng.normal(0.0, 1.0);
      beta[j] = bmean + llt.matrixU().solve(z);
    }

    // sigma^-2 | s, beta
    double rss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = data.y[i] - data.x.row(i).dot(beta[s[i]]);
      rss += d * d;
    }
    tau = rng.gamma(prior.a + 0.5 * n, prior.b + 0.5 * rss);

    // eta | s
    Eigen::VectorXd conc = Eigen::VectorXd::Constant(k, prior.alpha);
    for (int i = 0; i < n; ++i) {
      if (!opt.eta_counts_include_anchored && anchored_comp[i] >= 0) continue;
      conc[s[i]] += 1.0;
    }
    eta = rng.dirichlet(conc);

    if (t >= opt.burn_in) {
      const int row = t - opt.burn_in;
      for (int j = 0; j < k; ++j) chain.beta.row(row).segment(j * p, p) = beta[j].transpose();
      chain.sigma2[row] = 1.0 / tau;
      chain.eta.row(row) = eta.transpose();
      for (int i = 0; i < n; ++i) chain.s(row, i) = s[i];
    }
  }
  return chain;
}

// Posterior summaries: empirical allocation frequencies, MAP allocations
// (ties to the lowest component), posterior-mean coefficients and the
// (intercept, slope) line for each component.
struct FitSummary {
  Eigen::MatrixXd beta_mean;         // k x p
  std::vector<std::pair<double, double>> lines;
  std::vector<int> s_hat;
  Eigen::MatrixXd allocation_probs;  // n x k
};

inline FitSummary map_allocations(const PosteriorChain& chain) {
  const int m = chain.draws();
  if (m < 1) throw InvalidInput("map_allocations: empty chain");
  const int n = chain.n, k = chain.k, p = chain.p;

  FitSummary fit;
  fit.allocation_probs = Eigen::MatrixXd::Zero(n, k);
  for (int t = 0; t < m; ++t)
    for (int i = 0; i < n; ++i) fit.allocation_probs(i, chain.s(t, i)) += 1.0;
  fit.allocation_probs /= m;

  fit.s_hat.resize(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (fit.allocation_probs(i, j) > fit.allocation_probs(i, best)) best = j;
    fit.s_hat[i] = best;
  }

  const Eigen::RowVectorXd flat = chain.beta.colwise().mean();
  fit.beta_mean.resize(k, p);
  for (int j = 0; j < k; ++j) fit.beta_mean.row(j) = flat.segment(j * p, p);
  fit.lines.resize(k);
  for (int j = 0; j < k; ++j)
    fit.lines[j] = {fit.beta_mean(j, 0), p > 1 ? fit.beta_mean(j, 1) : 0.0};
  return fit;
}

// Counts draws whose slopes are matched to the previous draw's better by a
// non-identity permutation (nearest-permutation matching in squared slope
// distance; ties favor the identity). Also emits the per-component slope
// traces for visual confirmation.
struct LabelSwitchDiagnostic {
  int switch_count = 0;
  Eigen::MatrixXd slope_traces;  // draws x k
};

inline LabelSwitchDiagnostic label_switch_diagnostic(const PosteriorChain& chain) {
  const int m = chain.draws();
  if (m < 1) throw InvalidInput("label_switch_diagnostic: empty chain");
  const int k = chain.k;
  if (k > 8) throw InvalidInput("label_switch_diagnostic: k too large to enumerate permutations");
  const int slope_col = chain.p > 1 ? 1 : 0;

  LabelSwitchDiagnostic diag;
  diag.slope_traces.resize(m, k);
  for (int t = 0; t < m; ++t)
    for (int j = 0; j < k; ++j) diag.slope_traces(t, j) = chain.beta_at(t, j, slope_col);

  std::vector<int> perm(k);
  for (int j = 0; j < k; ++j) perm[j] = j;
  const std::vector<int> identity = perm;
  for (int t = 1; t < m; ++t) {
    double id_cost = 0.0;
    for (int j = 0; j < k; ++j) {
      const double d = diag.slope_traces(t, j) - diag.slope_traces(t - 1, j);
      id_cost += d * d;
    }
    std::vector<int> rho = identity;
    bool switched = false;
    do {
      double cost = 0.0;
      for (int j = 0; j < k; ++j) {
        const double d = diag.slope_traces(t, rho[j]) - diag.slope_traces(t - 1, j);
        cost += d * d;
      }
      if (cost < id_cost) {
        switched = true;
        break;
      }
    } while (std::next_permutation(rho.begin(), rho.end()));
    diag.switch_count += switched;
  }
  return diag;
}

// Chance-corrected agreement between two partitions of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size() || a.empty())
    throw InvalidInput("adjusted_rand_index: partitions must be nonempty and equal length");
  const int n = static_cast<int>(a.size());
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> ra, rb;
  for (int i = 0; i < n; ++i) {
    cells[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto comb2 = [](double x) { return 0.5 * x * (x - 1.0); };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, v] : cells) index += comb2(v);
  for (const auto& [key, v] : ra) sum_a += comb2(v);
  for (const auto& [key, v] : rb) sum_b += comb2(v);
  const double expected = sum_a * sum_b / comb2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return index == expected ? 1.0 : 0.0;
  return (index - expected) / denom;
}

// Contingency table of estimated components against taxonomy labels
// (columns sorted by label), plus the adjusted Rand index of the two
// partitions.
struct CrosstabResult {
  Eigen::MatrixXi table;  // k x #labels
  std::vector<std::string> label_names;
  double ari = 0.0;
};

inline CrosstabResult taxonomy_crosstab(const std::vector<int>& s_hat,
                                        const std::vector<std::string>& labels) {
  if (labels.empty() || labels.size() != s_hat.size())
    throw InvalidInput("taxonomy_crosstab: taxonomy labels missing or mismatched");
  const int n = static_cast<int>(s_hat.size());
  int k = 0;
  for (int v : s_hat) {
    if (v < 0) throw InvalidInput("taxonomy_crosstab: negative component id");
    k = std::max(k, v + 1);
  }

  CrosstabResult out;
  std::map<std::string, int> col;
  for (const auto& l : labels) col.emplace(l, 0);
  int c = 0;
  for (auto& [name, idx] : col) {
    idx = c++;
    out.label_names.push_back(name);
  }
  out.table = Eigen::MatrixXi::Zero(k, c);
  std::vector<int> label_ids(n);
  for (int i = 0; i < n; ++i) {
    label_ids[i] = col[labels[i]];
    out.table(s_hat[i], label_ids[i]) += 1;
  }
  out.ari = adjusted_rand_index(s_hat, label_ids);
  return out;
}

}  // namespace anchormix
