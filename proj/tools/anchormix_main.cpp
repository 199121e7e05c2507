// anchormix CLI: select anchor points, fit the anchored mixture of
// regressions by MCMC, and cross-tabulate the resulting allocations against
// the taxonomy. All outputs are stamped with the config hash and seed so a
// run is reproducible from (dataset, config) alone.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "anchormix/anchormix.hpp"
#include "anchormix/config.hpp"

namespace {

using anchormix::AnchorSet;
using anchormix::Dataset;
using anchormix::InvalidInput;
using anchormix::RunConfig;
using nlohmann::json;

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string provenance_line(const RunConfig& cfg) {
  return "# config_hash=" + hash_hex(anchormix::config_hash(cfg)) +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

json anchors_to_json(const AnchorSet& anchors, const Dataset& data) {
  json arr = json::array();
  for (int j = 0; j < anchors.k(); ++j) {
    json entry;
    entry["component"] = j;
    entry["indices"] = anchors.sets[j];
    std::vector<std::string> names;
    for (int i : anchors.sets[j])
      names.push_back(i < static_cast<int>(data.species.size()) ? data.species[i] : "");
    entry["species"] = names;
    arr.push_back(entry);
  }
  return arr;
}

AnchorSet anchors_from_json(const json& j, int k) {
  if (!j.contains("anchors")) throw InvalidInput("anchors file: missing 'anchors' array");
  AnchorSet anchors;
  anchors.sets.assign(k, {});
  for (const auto& entry : j.at("anchors")) {
    const int comp = entry.at("component").get<int>();
    if (comp < 0 || comp >= k) throw InvalidInput("anchors file: component id out of range");
    anchors.sets[comp] = entry.at("indices").get<std::vector<int>>();
  }
  return anchors;
}

Dataset load_data(const RunConfig& cfg) {
  return anchormix::load_dataset(cfg.dataset, cfg.log_transform, cfg.center);
}

// --- select-anchors ---------------------------------------------------------

std::filesystem::path cmd_select_anchors(const RunConfig& cfg) {
  cfg.validate();
  const Dataset data = load_data(cfg);
  if (cfg.k * cfg.m > data.n())
    throw InvalidInput("select-anchors: k*m = " + std::to_string(cfg.k * cfg.m) +
                       " exceeds n = " + std::to_string(data.n()));
  anchormix::RngStream rng = anchormix::RngStream(cfg.seed).split(1);
  const std::vector<int> m(cfg.k, cfg.m);

  json out;
  out["config_hash"] = hash_hex(anchormix::config_hash(cfg));
  out["seed"] = cfg.seed;
  out["method"] = cfg.method;
  out["k"] = cfg.k;
  out["m"] = cfg.m;

  AnchorSet anchors;
  if (cfg.method == "em-reg") {
    const auto trace =
        anchormix::run_anchored_em_reg(data, cfg.reg_prior(), cfg.k, m, cfg.em, rng);
    anchors = trace.anchors;
    out["em_objective"] = trace.final_objective();
    out["em_iterations"] = trace.iterations;
    out["em_converged"] = trace.converged;
  } else if (cfg.method == "em-mvn") {
    const Eigen::MatrixXd z = anchormix::make_z(data);
    const auto trace =
        anchormix::run_anchored_em_mvn(z, cfg.mvn_prior(z), cfg.k, m, cfg.em, rng);
    anchors = trace.anchors;
    out["em_objective"] = trace.final_objective();
    out["em_iterations"] = trace.iterations;
    out["em_converged"] = trace.converged;
  } else {
    const auto result =
        anchormix::cdw_reg_anchors(data, cfg.reg_prior(), cfg.k, cfg.m, cfg.cdw, rng);
    anchors = result.anchors;

    std::string scores = provenance_line(cfg) + "index,species";
    for (int c = 0; c < result.summary.scores.cols(); ++c)
      scores += ",score_" + std::to_string(c);
    scores += ",cluster\n";
    for (int i = 0; i < data.n(); ++i) {
      scores += std::to_string(i) + "," + data.species[i];
      for (int c = 0; c < result.summary.scores.cols(); ++c)
        scores += "," + fmt(result.summary.scores(i, c));
      scores += "," + std::to_string(result.cluster_labels[i]) + "\n";
    }
    write_file(std::filesystem::path(cfg.out_dir) / "cdw_scores.csv", scores);

    json eig = json::array();
    for (int c = 0; c < result.summary.eigenvalues.size(); ++c)
      eig.push_back(result.summary.eigenvalues[c]);
    out["cdw_eigenvalues"] = eig;
  }

  out["anchors"] = anchors_to_json(anchors, data);
  const auto path = std::filesystem::path(cfg.out_dir) / "anchors.json";
  write_json(path, out);
  return path;
}

// --- fit --------------------------------------------------------------------

std::filesystem::path cmd_fit(const RunConfig& cfg, const std::filesystem::path& anchors_path) {
  cfg.validate();
  const Dataset data = load_data(cfg);

  std::ifstream in(anchors_path);
  if (!in) throw InvalidInput("fit: cannot open anchors file " + anchors_path.string());
  json aj;
  try {
    in >> aj;
  } catch (const json::exception& e) {
    throw InvalidInput("fit: bad anchors file: " + std::string(e.what()));
  }
  const AnchorSet anchors = anchors_from_json(aj, cfg.k);
  anchors.validate(data.n());

  anchormix::RngStream rng = anchormix::RngStream(cfg.seed).split(2);
  const auto chain =
      anchormix::gibbs_anchored_mixreg(data, anchors, cfg.reg_prior(), cfg.k, cfg.mcmc, rng);
  const auto fit = anchormix::map_allocations(chain);
  const auto diag = anchormix::label_switch_diagnostic(chain);
  const std::vector<int> anchored_comp = anchors.component_of(data.n());
  const std::string prov = provenance_line(cfg);
  const std::filesystem::path dir(cfg.out_dir);

  {  // full chain export, one row per draw
    std::string csv = prov + "draw";
    for (int j = 0; j < chain.k; ++j)
      for (int c = 0; c < chain.p; ++c)
        csv += ",beta_" + std::to_string(j) + "_" + std::to_string(c);
    csv += ",sigma2";
    for (int j = 0; j < chain.k; ++j) csv += ",eta_" + std::to_string(j);
    for (int i = 0; i < chain.n; ++i) csv += ",s_" + std::to_string(i);
    csv += "\n";
    for (int t = 0; t < chain.draws(); ++t) {
      csv += std::to_string(t);
      for (int c = 0; c < chain.k * chain.p; ++c) csv += "," + fmt(chain.beta(t, c));
      csv += "," + fmt(chain.sigma2[t]);
      for (int j = 0; j < chain.k; ++j) csv += "," + fmt(chain.eta(t, j));
      for (int i = 0; i < chain.n; ++i) csv += "," + std::to_string(chain.s(t, i));
      csv += "\n";
    }
    write_file(dir / "chain.csv", csv);
  }

  {  // per-observation plot data
    std::string csv = prov + "index,species,x,y,s_hat,anchored,anchored_component\n";
    for (int i = 0; i < data.n(); ++i) {
      csv += std::to_string(i) + "," + data.species[i] + "," + fmt(data.x(i, 1)) + "," +
             fmt(data.y[i]) + "," + std::to_string(fit.s_hat[i]) + "," +
             (anchored_comp[i] >= 0 ? "1" : "0") + "," + std::to_string(anchored_comp[i]) + "\n";
    }
    write_file(dir / "fit_points.csv", csv);
  }

  {  // posterior-mean line endpoints over the observed x range
    const double x0 = data.x.col(1).minCoeff(), x1 = data.x.col(1).maxCoeff();
    std::string csv = prov + "component,x0,y0,x1,y1\n";
    for (int j = 0; j < chain.k; ++j) {
      const auto [b0, b1] = fit.lines[j];
      csv += std::to_string(j) + "," + fmt(x0) + "," + fmt(b0 + b1 * x0) + "," + fmt(x1) + "," +
             fmt(b0 + b1 * x1) + "\n";
    }
    write_file(dir / "fit_lines.csv", csv);
  }

  {  // slope traces for convergence / label-switch inspection
    std::string csv = prov + "draw";
    for (int j = 0; j < chain.k; ++j) csv += ",slope_" + std::to_string(j);
    csv += "\n";
    for (int t = 0; t < chain.draws(); ++t) {
      csv += std::to_string(t);
      for (int j = 0; j < chain.k; ++j) csv += "," + fmt(diag.slope_traces(t, j));
      csv += "\n";
    }
    write_file(dir / "slope_traces.csv", csv);
  }

  json out;
  out["config_hash"] = hash_hex(anchormix::config_hash(cfg));
  out["seed"] = cfg.seed;
  out["method"] = cfg.method;
  out["k"] = cfg.k;
  out["n"] = data.n();
  out["anchors"] = anchors_to_json(anchors, data);
  json lines = json::array();
  for (const auto& [b0, b1] : fit.lines) lines.push_back({{"intercept", b0}, {"slope", b1}});
  out["lines"] = lines;
  json beta_mean = json::array();
  for (int j = 0; j < chain.k; ++j) {
    json row = json::array();
    for (int c = 0; c < chain.p; ++c) row.push_back(fit.beta_mean(j, c));
    beta_mean.push_back(row);
  }
  out["beta_mean"] = beta_mean;
  out["sigma2_mean"] = chain.sigma2.mean();
  json eta_mean = json::array();
  for (int j = 0; j < chain.k; ++j) eta_mean.push_back(chain.eta.col(j).mean());
  out["eta_mean"] = eta_mean;
  out["s_hat"] = fit.s_hat;
  json probs = json::array();
  for (int i = 0; i < data.n(); ++i) {
    json row = json::array();
    for (int j = 0; j < chain.k; ++j) row.push_back(fit.allocation_probs(i, j));
    probs.push_back(row);
  }
  out["allocation_probs"] = probs;
  std::vector<int> sizes(chain.k, 0);
  for (int v : fit.s_hat) ++sizes[v];
  out["component_sizes"] = sizes;
  out["label_switches"] = diag.switch_count;
  const auto path = dir / "summary.json";
  write_json(path, out);
  return path;
}

// --- crosstab ---------------------------------------------------------------

std::filesystem::path cmd_crosstab(const RunConfig& cfg, const std::filesystem::path& summary_path,
                                   const std::string& taxonomy) {
  cfg.validate();
  const Dataset data = load_data(cfg);
  if (!data.has_taxonomy()) throw InvalidInput("crosstab: dataset has no taxonomy labels");

  std::ifstream in(summary_path);
  if (!in) throw InvalidInput("crosstab: cannot open summary file " + summary_path.string());
  json sj;
  try {
    in >> sj;
  } catch (const json::exception& e) {
    throw InvalidInput("crosstab: bad summary file: " + std::string(e.what()));
  }
  const std::vector<int> s_hat = sj.at("s_hat").get<std::vector<int>>();
  if (static_cast<int>(s_hat.size()) != data.n())
    throw InvalidInput("crosstab: summary and dataset sizes differ");

  const std::vector<std::string>& labels = taxonomy == "suborder" ? data.suborder : data.order;
  const auto result = anchormix::taxonomy_crosstab(s_hat, labels);

  std::string csv = provenance_line(cfg) + "component";
  for (const auto& name : result.label_names) csv += "," + name;
  csv += "\n";
  for (int j = 0; j < result.table.rows(); ++j) {
    csv += std::to_string(j);
    for (int c = 0; c < result.table.cols(); ++c) csv += "," + std::to_string(result.table(j, c));
    csv += "\n";
  }
  const std::filesystem::path dir(cfg.out_dir);
  write_file(dir / "crosstab.csv", csv);

  json out;
  out["config_hash"] = hash_hex(anchormix::config_hash(cfg));
  out["seed"] = cfg.seed;
  out["taxonomy"] = taxonomy;
  out["ari"] = result.ari;
  out["labels"] = result.label_names;
  write_json(dir / "crosstab.json", out);

  std::cout << "ARI (" << taxonomy << "): " << result.ari << "\n";
  return dir / "crosstab.csv";
}

void cmd_run_all(const RunConfig& base, const std::string& taxonomy) {
  for (const std::string method : {"em-reg", "em-mvn", "cdw-reg"}) {
    RunConfig cfg = base;
    cfg.method = method;
    cfg.out_dir = (std::filesystem::path(base.out_dir) / method).string();
    const auto anchors_path = cmd_select_anchors(cfg);
    const auto summary_path = cmd_fit(cfg, anchors_path);
    cmd_crosstab(cfg, summary_path, taxonomy);
    std::cout << method << ": outputs in " << cfg.out_dir << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchored Bayesian mixture-of-regressions pipeline"};
  app.require_subcommand(1);

  std::string config_path, method_override, out_override, anchors_file, summary_file;
  std::string taxonomy = "order";
  std::uint64_t seed_override = 0;
  bool have_seed = false;

  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  app.add_option("--method", method_override, "override the config method");
  app.add_option("--out", out_override, "override the config output directory");

  CLI::App* sel = app.add_subcommand("select-anchors", "run the configured anchoring strategy");
  CLI::App* fit = app.add_subcommand("fit", "fit the anchored mixture by MCMC");
  fit->add_option("--anchors", anchors_file, "anchors JSON from select-anchors");
  CLI::App* cross = app.add_subcommand("crosstab", "compare MAP allocations with the taxonomy");
  cross->add_option("--summary", summary_file, "summary JSON from fit");
  cross->add_option("--taxonomy", taxonomy, "order or suborder")
      ->check(CLI::IsMember({"order", "suborder"}));
  CLI::App* all = app.add_subcommand("run-all", "all three strategies end to end");
  all->add_option("--taxonomy", taxonomy, "order or suborder")
      ->check(CLI::IsMember({"order", "suborder"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg = anchormix::load_config(config_path);
    if (have_seed) cfg.seed = seed_override;
    if (!method_override.empty()) cfg.method = method_override;
    if (!out_override.empty()) cfg.out_dir = out_override;

    if (sel->parsed()) {
      std::cout << cmd_select_anchors(cfg).string() << "\n";
    } else if (fit->parsed()) {
      const std::filesystem::path anchors_path =
          anchors_file.empty() ? std::filesystem::path(cfg.out_dir) / "anchors.json"
                               : std::filesystem::path(anchors_file);
      std::cout << cmd_fit(cfg, anchors_path).string() << "\n";
    } else if (cross->parsed()) {
      const std::filesystem::path summary_path =
          summary_file.empty() ? std::filesystem::path(cfg.out_dir) / "summary.json"
                               : std::filesystem::path(summary_file);
      cmd_crosstab(cfg, summary_path, taxonomy);
    } else if (all->parsed()) {
      cmd_run_all(cfg, taxonomy);
    }
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
