// numerics.hpp -- numerical kernels shared by the model modules: a seedable
// random stream with the samplers the Gibbs code needs, symmetric
// eigendecomposition, k-means, and the exact anchor-assignment solver.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "anchormix/core.hpp"

namespace anchormix {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Seedable stream of random draws. The engine is std::mt19937_64 (fully
// specified by the standard, so sequences are reproducible across
// platforms); all distribution transforms are implemented here rather than
// with std:: distributions, whose output is implementation-defined.
// Independent child streams for parallel units come from split().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed)
      : seed_(seed), engine_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

  // Child stream whose sequence is independent of the parent's.
  RngStream split(std::uint64_t stream_id) const {
    return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(stream_id + 1)));
  }

  std::uint64_t raw() {
    ++counter_;
    return engine_();
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  // Uniform integer on [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw InvalidInput("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % un;
    std::uint64_t x;
    do {
      x = raw();
    } while (x >= limit);
    return static_cast<int>(x % un);
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<int> sample_distinct(int n, int k) {
    if (k > n) throw InvalidInput("sample_distinct: k must not exceed n");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    return out;
  }

  double normal(double mean, double var) {
    if (!(var >= 0.0)) throw InvalidInput("normal: variance must be nonnegative");
    const double u1 = 1.0 - uniform();  // (0, 1] keeps the log finite
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + std::sqrt(var) * z;
  }

  // Marsaglia-Tsang; rate parameterization (mean shape/rate).
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
      throw InvalidInput("gamma: shape and rate must be positive");
    if (shape < 1.0) {
      const double u = 1.0 - uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal(0.0, 1.0);
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
    }
  }

  Eigen::VectorXd mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    const int p = static_cast<int>(mean.size());
    if (cov.rows() != p || cov.cols() != p) throw InvalidInput("mvn: dimension mismatch");
    Eigen::VectorXd z(p);
    for (int i = 0; i < p; ++i) z[i] = normal(0.0, 1.0);
    const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(sym);
    if (llt.info() == Eigen::Success) return mean + llt.matrixL() * z;
    // PSD but rank-deficient: factor through the spectrum instead.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericError("mvn: eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, sym.norm()))
      throw InvalidInput("mvn: covariance is not positive semidefinite");
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return mean + es.eigenvectors() * root.asDiagonal() * z;
  }

  Eigen::VectorXd dirichlet(const Eigen::VectorXd& conc) {
    if (conc.size() < 1 || conc.minCoeff() <= 0.0)
      throw InvalidInput("dirichlet: concentrations must be positive");
    Eigen::VectorXd g(conc.size());
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (Eigen::Index i = 0; i < conc.size(); ++i) g[i] = gamma(conc[i], 1.0);
      const double s = g.sum();
      if (s > 0.0) return g / s;
    }
    throw NumericError("dirichlet: all gamma draws underflowed");
  }

  int categorical(const Eigen::VectorXd& probs) {
    if (probs.size() < 1 || probs.minCoeff() < 0.0)
      throw InvalidInput("categorical: probabilities must be nonnegative");
    const double s = probs.sum();
    if (std::abs(s - 1.0) > 1e-8) throw InvalidInput("categorical: probabilities must sum to 1");
    const double u = uniform() * s;
    double acc = 0.0;
    int last_positive = 0;
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
      if (probs[j] > 0.0) last_positive = static_cast<int>(j);
      acc += probs[j];
      if (u < acc) return static_cast<int>(j);
    }
    return last_positive;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

// Full spectrum of a symmetric matrix, eigenvalues sorted descending and
// eigenvectors in matching columns. Each eigenvector's sign is fixed so its
// largest-magnitude entry is positive.
struct SymEigResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

inline SymEigResult sym_eig(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols() || s.rows() < 1) throw InvalidInput("sym_eig: matrix must be square");
  if (!s.allFinite()) throw InvalidInput("sym_eig: non-finite entries");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidInput("sym_eig: matrix is not symmetric");
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) throw NumericError("sym_eig: decomposition failed");

  const int d = static_cast<int>(s.rows());
  SymEigResult out;
  out.values.resize(d);
  out.vectors.resize(d, d);
  for (int i = 0; i < d; ++i) {
    out.values[i] = es.eigenvalues()[d - 1 - i];
    Eigen::VectorXd v = es.eigenvectors().col(d - 1 - i);
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.vectors.col(i) = v;
  }
  return out;
}

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs.
// Nearest-centroid ties break to the lowest cluster id; the degenerate flag
// marks the all-identical-points case where k > 1 clusters cannot separate
// anything.
struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;
  double objective = 0.0;
  bool degenerate = false;
};

namespace detail {

inline void kmeans_assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                          std::vector<int>& labels) {
  const int n = static_cast<int>(points.rows());
  const int k = static_cast<int>(centroids.rows());
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (points.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[i] = best;
  }
}

inline double kmeans_wcss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                          const std::vector<int>& labels) {
  double s = 0.0;
  for (int i = 0; i < static_cast<int>(points.rows()); ++i)
    s += (points.row(i) - centroids.row(labels[i])).squaredNorm();
  return s;
}

}  // namespace detail

inline KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts, RngStream& rng) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  if (n < 1 || d < 1) throw InvalidInput("kmeans: empty input");
  if (!points.allFinite()) throw InvalidInput("kmeans: non-finite entries");
  if (k < 1 || k > n) throw InvalidInput("kmeans: need 1 <= k <= n");
  if (restarts < 1) throw InvalidInput("kmeans: restarts must be >= 1");

  bool all_identical = true;
  for (int i = 1; i < n && all_identical; ++i)
    all_identical = (points.row(i) == points.row(0));
  if (all_identical) {
    KMeansResult out;
    out.labels.assign(n, 0);
    out.centroids = points.row(0).replicate(k, 1);
    out.objective = 0.0;
    out.degenerate = k > 1;
    return out;
  }

  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();

  for (int run = 0; run < restarts; ++run) {
    // k-means++ seeding
    Eigen::MatrixXd centroids(k, d);
    std::vector<bool> chosen(n, false);
    int first = rng.uniform_int(n);
    centroids.row(0) = points.row(first);
    chosen[first] = true;
    Eigen::VectorXd d2(n);
    for (int i = 0; i < n; ++i) d2[i] = (points.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double total = d2.sum();
      int pick = -1;
      if (total > 0.0) {
        const double u = rng.uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
          acc += d2[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        if (pick < 0) pick = n - 1;
      } else {
        for (int i = 0; i < n; ++i)
          if (!chosen[i]) {
            pick = i;
            break;
          }
        if (pick < 0) pick = 0;
      }
      centroids.row(c) = points.row(pick);
      chosen[pick] = true;
      for (int i = 0; i < n; ++i)
        d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c)).squaredNorm());
    }

    std::vector<int> labels(n, 0), prev;
    for (int iter = 0; iter < 200; ++iter) {
      detail::kmeans_assign(points, centroids, labels);

      // repair empty clusters with the point farthest from its centroid
      std::vector<int> count(k, 0);
      for (int i = 0; i < n; ++i) ++count[labels[i]];
      for (int c = 0; c < k; ++c) {
        if (count[c] > 0) continue;
        int far = -1;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          if (count[labels[i]] < 2) continue;
          const double dist = (points.row(i) - centroids.row(labels[i])).squaredNorm();
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        if (far < 0) break;
        --count[labels[far]];
        labels[far] = c;
        ++count[c];
      }

      for (int c = 0; c < k; ++c) {
        if (count[c] == 0) continue;
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
        for (int i = 0; i < n; ++i)
          if (labels[i] == c) mean += points.row(i);
        centroids.row(c) = mean / count[c];
      }
      if (labels == prev) break;
      prev = labels;
    }

    // final pure assignment so the nearest-centroid invariant holds exactly
    detail::kmeans_assign(points, centroids, labels);
    const double obj = detail::kmeans_wcss(points, centroids, labels);
    if (obj < best.objective) {
      best.labels = labels;
      best.centroids = centroids;
      best.objective = obj;
    }
  }
  return best;
}

namespace detail {

// Jonker-Volgenant style shortest augmenting path assignment for a
// rectangular cost matrix with rows <= cols; minimizes total cost.
// col_of[r] receives the column assigned to row r.
inline double min_cost_assignment(const Eigen::MatrixXd& cost, std::vector<int>& col_of) {
  const int nr = static_cast<int>(cost.rows());
  const int nc = static_cast<int>(cost.cols());
  if (nr > nc) throw InvalidInput("min_cost_assignment: rows must not exceed cols");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(nr + 1, 0.0), v(nc + 1, 0.0);
  std::vector<int> p(nc + 1, 0), way(nc + 1, 0);
  for (int i = 1; i <= nr; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(nc + 1, inf);
    std::vector<bool> used(nc + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= nc; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= nc; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  col_of.assign(nr, -1);
  double total = 0.0;
  for (int j = 1; j <= nc; ++j) {
    if (p[j] == 0) continue;
    col_of[p[j] - 1] = j - 1;
    total += cost(p[j] - 1, j - 1);
  }
  return total;
}

}  // namespace detail

// Exact maximizer of sum_j sum_{i in A_j} r_ij over disjoint sets with the
// requested sizes, solved as a rectangular assignment of sum(m) component
// slots to observations. Among equal-score optima the result is the
// lexicographically smallest assignment when components are scanned in
// increasing id and observations in increasing index (score ties within
// 1e-9 of the optimum count as exact).
inline AnchorSet assign_anchors(const Responsibilities& r, const std::vector<int>& m) {
  const int n = r.n();
  const int k = r.k();
  if (static_cast<int>(m.size()) != k)
    throw InvalidInput("assign_anchors: m must have one size per component");
  int total = 0;
  for (int mj : m) {
    if (mj < 0) throw InvalidInput("assign_anchors: sizes must be nonnegative");
    total += mj;
  }
  if (total > n) throw InvalidInput("assign_anchors: sum of sizes exceeds n");

  AnchorSet anchors;
  anchors.sets.assign(k, {});
  if (total == 0) return anchors;

  std::vector<int> slot_comp;
  slot_comp.reserve(total);
  for (int j = 0; j < k; ++j)
    for (int t = 0; t < m[j]; ++t) slot_comp.push_back(j);

  Eigen::MatrixXd cost(total, n);
  for (int s = 0; s < total; ++s) cost.row(s) = -r.r.col(slot_comp[s]).transpose();

  std::vector<int> col_of;
  const double best = -detail::min_cost_assignment(cost, col_of);
  const double tol = 1e-9 * std::max(1.0, std::abs(best));

  // Fix slots one at a time to the lowest observation index that still
  // admits an optimal completion.
  std::vector<bool> used(n, false);
  std::vector<int> pick(total, -1);
  double fixed_sum = 0.0;
  for (int s = 0; s < total; ++s) {
    const int remaining = total - s - 1;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      double completion = 0.0;
      if (remaining > 0) {
        Eigen::MatrixXd sub(remaining, n - s - 1);
        int cc = 0;
        std::vector<int> obs_map(n - s - 1);
        for (int j = 0; j < n; ++j) {
          if (used[j] || j == i) continue;
          for (int t = 0; t < remaining; ++t) sub(t, cc) = -r.r(j, slot_comp[s + 1 + t]);
          obs_map[cc] = j;
          ++cc;
        }
        std::vector<int> sub_cols;
        completion = -detail::min_cost_assignment(sub, sub_cols);
      }
      if (fixed_sum + r.r(i, slot_comp[s]) + completion >= best - tol) {
        pick[s] = i;
        used[i] = true;
        fixed_sum += r.r(i, slot_comp[s]);
        break;
      }
    }
    if (pick[s] < 0) throw NumericError("assign_anchors: failed to extract optimal assignment");
  }

  for (int s = 0; s < total; ++s) anchors.sets[slot_comp[s]].push_back(pick[s]);
  for (auto& set : anchors.sets) std::sort(set.begin(), set.end());
  return anchors;
}

}  // namespace anchormix
