// config.hpp -- the run configuration shared by all CLI subcommands: a
// single JSON document whose fields default to the library defaults, plus a
// stable content hash used for output provenance.

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchormix/cdw.hpp"
#include "anchormix/core.hpp"
#include "anchormix/em_anchor.hpp"
#include "anchormix/gibbs.hpp"

namespace anchormix {

struct RunConfig {
  std::string dataset;
  std::string method = "em-reg";  // em-reg | em-mvn | cdw-reg
  int k = 3;
  int m = 3;  // anchor points per component
  std::uint64_t seed = 20260809;
  bool log_transform = true;
  bool center = true;

  std::vector<double> mu_beta{3.5, 0.6};
  std::vector<double> v{1.0, 0.5};
  double a = 5.0;
  double b = 1.0;
  double alpha = 1.0;

  // Gaussian-mixture anchoring prior; empty mu means the sample mean of z.
  std::optional<std::vector<double>> mvn_mu;
  double mvn_kappa = 1.25;
  double mvn_w_scale = 1.5;
  double mvn_nu = 2.0;
  double mvn_alpha = 1.0;

  EmOptions em;
  CdwOptions cdw;
  GibbsOptions mcmc;

  std::string out_dir = "out";

  void validate() const {
    if (method != "em-reg" && method != "em-mvn" && method != "cdw-reg")
      throw InvalidInput("config: unknown method '" + method + "'");
    if (k < 1 || m < 1) throw InvalidInput("config: k and m must be positive");
    if (mu_beta.size() != v.size() || mu_beta.empty())
      throw InvalidInput("config: mu_beta and v must be nonempty and equal length");
    if (dataset.empty()) throw InvalidInput("config: dataset path is required");
  }

  RegPrior reg_prior() const {
    RegPrior prior;
    prior.mu_beta = Eigen::Map<const Eigen::VectorXd>(mu_beta.data(), mu_beta.size());
    prior.v = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    prior.a = a;
    prior.b = b;
    prior.alpha = alpha;
    return prior;
  }

  MvnPrior mvn_prior(const Eigen::MatrixXd& z) const {
    MvnPrior prior;
    if (mvn_mu) {
      if (static_cast<Eigen::Index>(mvn_mu->size()) != z.cols())
        throw InvalidInput("config: mvn mu dimension mismatch");
      prior.mu = Eigen::Map<const Eigen::VectorXd>(mvn_mu->data(), mvn_mu->size());
    } else {
      prior.mu = z.colwise().mean().transpose();
    }
    prior.kappa = mvn_kappa;
    prior.w = mvn_w_scale * Eigen::MatrixXd::Identity(z.cols(), z.cols());
    prior.nu = mvn_nu;
    prior.alpha = mvn_alpha;
    return prior;
  }
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dataset"] = c.dataset;
  j["method"] = c.method;
  j["k"] = c.k;
  j["m"] = c.m;
  j["seed"] = c.seed;
  j["log_transform"] = c.log_transform;
  j["center"] = c.center;
  j["reg_prior"] = {{"mu_beta", c.mu_beta}, {"v", c.v}, {"a", c.a}, {"b", c.b},
                    {"alpha", c.alpha}};
  nlohmann::json mvn = {{"kappa", c.mvn_kappa}, {"w_scale", c.mvn_w_scale},
                        {"nu", c.mvn_nu},       {"alpha", c.mvn_alpha}};
  if (c.mvn_mu) mvn["mu"] = *c.mvn_mu;
  j["mvn_prior"] = mvn;
  j["em"] = {{"n_starts", c.em.n_starts},
             {"max_iter", c.em.max_iter},
             {"tol", c.em.tol},
             {"reanchor_each_iteration", c.em.reanchor_each_iteration}};
  j["cdw"] = {{"n_samples", c.cdw.n_samples},
              {"burn_in", c.cdw.burn_in},
              {"pca_dims", c.cdw.pca_dims},
              {"kmeans_restarts", c.cdw.kmeans_restarts}};
  j["mcmc"] = {{"n_samples", c.mcmc.n_samples},
               {"burn_in", c.mcmc.burn_in},
               {"eta_counts_include_anchored", c.mcmc.eta_counts_include_anchored}};
  j["out_dir"] = c.out_dir;
  return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  auto get = [&](const nlohmann::json& obj, const char* key, auto& field) {
    if (obj.contains(key)) obj.at(key).get_to(field);
  };
  get(j, "dataset", c.dataset);
  get(j, "method", c.method);
  get(j, "k", c.k);
  get(j, "m", c.m);
  get(j, "seed", c.seed);
  get(j, "log_transform", c.log_transform);
  get(j, "center", c.center);
  if (j.contains("reg_prior")) {
    const auto& r = j.at("reg_prior");
    get(r, "mu_beta", c.mu_beta);
    get(r, "v", c.v);
    get(r, "a", c.a);
    get(r, "b", c.b);
    get(r, "alpha", c.alpha);
  }
  if (j.contains("mvn_prior")) {
    const auto& m = j.at("mvn_prior");
    if (m.contains("mu")) c.mvn_mu = m.at("mu").get<std::vector<double>>();
    get(m, "kappa", c.mvn_kappa);
    get(m, "w_scale", c.mvn_w_scale);
    get(m, "nu", c.mvn_nu);
    get(m, "alpha", c.mvn_alpha);
  }
  if (j.contains("em")) {
    const auto& e = j.at("em");
    get(e, "n_starts", c.em.n_starts);
    get(e, "max_iter", c.em.max_iter);
    get(e, "tol", c.em.tol);
    get(e, "reanchor_each_iteration", c.em.reanchor_each_iteration);
  }
  if (j.contains("cdw")) {
    const auto& d = j.at("cdw");
    get(d, "n_samples", c.cdw.n_samples);
    get(d, "burn_in", c.cdw.burn_in);
    get(d, "pca_dims", c.cdw.pca_dims);
    get(d, "kmeans_restarts", c.cdw.kmeans_restarts);
  }
  if (j.contains("mcmc")) {
    const auto& m = j.at("mcmc");
    get(m, "n_samples", c.mcmc.n_samples);
    get(m, "burn_in", c.mcmc.burn_in);
    get(m, "eta_counts_include_anchored", c.mcmc.eta_counts_include_anchored);
  }
  get(j, "out_dir", c.out_dir);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("config: parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

// FNV-1a over the canonical (sorted-key) JSON serialization; stable across
// runs and platforms, used to stamp output files.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace anchormix
