// cdw.hpp -- anchor selection from case-deletion importance-sampling
// weights: a Gibbs sampler for Bayesian linear regression, the log-weight
// matrix and its normalization, the covariance/PCA influence summary, and
// two-level k-means extraction of anchor points.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "anchormix/core.hpp"
#include "anchormix/numerics.hpp"

namespace anchormix {

// Posterior draws of (beta, sigma2) for the single-component regression.
struct SlrChain {
  Eigen::MatrixXd beta;    // draws x p
  Eigen::VectorXd sigma2;  // draws

  int draws() const { return static_cast<int>(sigma2.size()); }
};

// Gibbs sampler alternating beta | sigma2 (Gaussian) and sigma^-2 | beta
// (Gamma); the first burn_in scans are discarded.
inline SlrChain gibbs_slr(const Dataset& data, const RegPrior& prior, int n_samples, int burn_in,
                          RngStream& rng) {
  data.validate();
  const int n = data.n(), p = data.p();
  prior.validate(p);
  if (n < p) throw InvalidInput("gibbs_slr: need n >= p");
  if (n_samples < 1 || burn_in < 0) throw InvalidInput("gibbs_slr: bad chain lengths");

  const Eigen::MatrixXd xtx = data.x.transpose() * data.x;
  const Eigen::VectorXd xty = data.x.transpose() * data.y;
  const Eigen::VectorXd v_inv = prior.v.cwiseInverse();
  const Eigen::VectorXd v_inv_mu = v_inv.cwiseProduct(prior.mu_beta);

  Eigen::VectorXd beta(p);
  for (int c = 0; c < p; ++c) beta[c] = rng.normal(prior.mu_beta[c], prior.v[c]);
  double tau = rng.gamma(prior.a, prior.b);

  SlrChain chain;
  chain.beta.resize(n_samples, p);
  chain.sigma2.resize(n_samples);
  Eigen::VectorXd z(p);
  for (int t = 0; t < burn_in + n_samples; ++t) {
    Eigen::MatrixXd a = tau * xtx;
    a.diagonal() += v_inv;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) throw NumericError("gibbs_slr: precision not PD");
    const Eigen::VectorXd mean = llt.solve(tau * xty + v_inv_mu);
    for (int c = 0; c < p; ++c) z[c] = rng.normal(0.0, 1.0);
    beta = mean + llt.matrixU().solve(z);

    const double rss = (data.y - data.x * beta).squaredNorm();
    tau = rng.gamma(prior.a + 0.5 * n, prior.b + 0.5 * rss);

    if (t >= burn_in) {
      chain.beta.row(t - burn_in) = beta.transpose();
      chain.sigma2[t - burn_in] = 1.0 / tau;
    }
  }
  return chain;
}

// Log case-deletion weights and, once normalized, the per-observation
// importance weights across draws (each normalized row sums to 1).
struct WeightMatrix {
  Eigen::MatrixXd logw;  // n x draws
  std::optional<Eigen::MatrixXd> normalized;

  int n() const { return static_cast<int>(logw.rows()); }
  int draws() const { return static_cast<int>(logw.cols()); }
};

// For conditionally independent likelihoods the deletion weight is
// w_i(theta) = 1 / f(y_i | x_i, theta), so the log weight is the negated
// observation log density at each posterior draw.
inline WeightMatrix log_case_deletion_weights(const Dataset& data, const SlrChain& chain) {
  data.validate();
  const int n = data.n(), m = chain.draws();
  if (m < 1) throw InvalidInput("log_case_deletion_weights: empty chain");
  if (chain.beta.cols() != data.p())
    throw InvalidInput("log_case_deletion_weights: dimension mismatch");

  WeightMatrix w;
  w.logw.resize(n, m);
  for (int t = 0; t < m; ++t) {
    const Eigen::VectorXd mean = data.x * chain.beta.row(t).transpose();
    for (int i = 0; i < n; ++i)
      w.logw(i, t) = -log_normal_pdf(data.y[i], mean[i], chain.sigma2[t]);
  }
  return w;
}

// Row-wise exp-normalization through log-sum-exp.
inline WeightMatrix normalize_weights(WeightMatrix w) {
  const int n = w.n(), m = w.draws();
  Eigen::MatrixXd norm(n, m);
  for (int i = 0; i < n; ++i) {
    const double lse = log_sum_exp(w.logw.row(i).transpose());
    if (!std::isfinite(lse)) throw NumericError("normalize_weights: non-finite row");
    norm.row(i) = (w.logw.row(i).array() - lse).exp();
    norm.row(i) /= norm.row(i).sum();
  }
  w.normalized = std::move(norm);
  return w;
}

// Sample covariance of the log weights across draws and its leading
// eigenstructure; the score columns are the top-d orthonormal eigenvectors,
// the coordinates of the PCA display.
struct InfluenceSummary {
  Eigen::MatrixXd c_hat;   // n x n
  Eigen::MatrixXd scores;  // n x d
  Eigen::VectorXd eigenvalues;
};

inline InfluenceSummary influence_summary(const WeightMatrix& w, int d = 3) {
  const int n = w.n(), m = w.draws();
  if (m < 2) throw InvalidInput("influence_summary: need at least two draws");
  if (d < 1 || d > n) throw InvalidInput("influence_summary: need 1 <= d <= n");

  const Eigen::MatrixXd centered = w.logw.colwise() - w.logw.rowwise().mean();
  InfluenceSummary out;
  out.c_hat = centered * centered.transpose() / (m - 1);
  const SymEigResult eig = sym_eig(out.c_hat);
  out.scores = eig.vectors.leftCols(d);
  out.eigenvalues = eig.values.head(d);
  return out;
}

struct CdwSelection {
  AnchorSet anchors;
  std::vector<int> cluster_labels;  // component id per observation
};

// Two-level k-means on the PCA scores: k clusters, then m sub-clusters
// within each, anchoring the member nearest to each sub-centroid. Clusters
// map to components in order of decreasing size. A cluster with fewer than
// m members is an error; choose a smaller m instead.
inline CdwSelection cdw_select_anchors(const InfluenceSummary& summary, int k, int m,
                                       RngStream& rng, int restarts = 25) {
  const int n = static_cast<int>(summary.scores.rows());
  if (k < 1 || m < 1) throw InvalidInput("cdw_select_anchors: k and m must be positive");
  if (k * m > n) throw InvalidInput("cdw_select_anchors: k*m exceeds n");

  const KMeansResult top = kmeans(summary.scores, k, restarts, rng);
  if (top.degenerate) throw NumericError("cdw_select_anchors: degenerate score geometry");

  std::vector<std::vector<int>> members(k);
  for (int i = 0; i < n; ++i) members[top.labels[i]].push_back(i);
  std::vector<int> order(k);
  for (int c = 0; c < k; ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return members[a].size() > members[b].size();
  });

  CdwSelection out;
  out.anchors.sets.assign(k, {});
  out.cluster_labels.assign(n, -1);
  for (int j = 0; j < k; ++j) {
    const std::vector<int>& mem = members[order[j]];
    for (int i : mem) out.cluster_labels[i] = j;
    if (static_cast<int>(mem.size()) < m)
      throw InvalidInput("cdw_select_anchors: cluster ranked " + std::to_string(j + 1) +
                         " has only " + std::to_string(mem.size()) +
                         " members; reduce m");

    Eigen::MatrixXd pts(mem.size(), summary.scores.cols());
    for (size_t t = 0; t < mem.size(); ++t) pts.row(t) = summary.scores.row(mem[t]);
    const KMeansResult sub = kmeans(pts, m, restarts, rng);

    for (int sc = 0; sc < m; ++sc) {
      int rep = -1;
      double best = std::numeric_limits<double>::infinity();
      for (size_t t = 0; t < mem.size(); ++t) {
        if (sub.labels[t] != sc) continue;
        const double dist = (pts.row(t) - sub.centroids.row(sc)).squaredNorm();
        if (dist < best) {
          best = dist;
          rep = mem[t];
        }
      }
      if (rep < 0) throw NumericError("cdw_select_anchors: empty sub-cluster");
      out.anchors.sets[j].push_back(rep);
    }
    std::sort(out.anchors.sets[j].begin(), out.anchors.sets[j].end());
  }
  return out;
}

struct CdwOptions {
  int n_samples = 10000;
  int burn_in = 1000;
  int pca_dims = 3;
  int kmeans_restarts = 25;
};

struct CdwResult {
  AnchorSet anchors;
  std::vector<int> cluster_labels;
  InfluenceSummary summary;
};

// Whole CDW-reg pipeline: fit the single-line model, compute the influence
// summary of the log deletion weights, cluster, select anchors.
inline CdwResult cdw_reg_anchors(const Dataset& data, const RegPrior& prior, int k, int m,
                                 const CdwOptions& opt, RngStream& rng) {
  const SlrChain chain = gibbs_slr(data, prior, opt.n_samples, opt.burn_in, rng);
  const WeightMatrix w = log_case_deletion_weights(data, chain);
  CdwResult out;
  out.summary = influence_summary(w, opt.pca_dims);
  CdwSelection sel = cdw_select_anchors(out.summary, k, m, rng, opt.kmeans_restarts);
  out.anchors = std::move(sel.anchors);
  out.cluster_labels = std::move(sel.cluster_labels);
  return out;
}

}  // namespace anchormix
