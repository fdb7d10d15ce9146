#include "scglr/cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "scglr/csv.hpp"
#include "scglr/errors.hpp"
#include "scglr/fit.hpp"

namespace scglr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

std::vector<double> number_list(const std::string& text, const std::string& key) {
  KeyValueConfig tmp;
  tmp.set(key, text);
  return tmp.get_list(key);
}

std::vector<int> int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  for (const double d : number_list(text, key)) {
    const int i = static_cast<int>(d);
    if (d != i) throw UserError("config key '" + key + "' must list integers");
    out.push_back(i);
  }
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += format_double(static_cast<double>(items[i]));
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_kv(const KeyValueConfig& kv) {
  RunConfig c;
  c.command = kv.get_string("command", c.command);
  c.responses = kv.get_string("responses", c.responses);
  c.predictors = kv.get_string("predictors", c.predictors);
  c.covariates = kv.get_string("covariates", c.covariates);
  c.groups_col = kv.get_string("groups-col", c.groups_col);
  if (kv.has("families")) c.families = split_list(*kv.get("families"));
  c.out = kv.get_string("out", c.out);
  c.model_path = kv.get_string("model", c.model_path);

  c.K = kv.get_int("K", c.K);
  c.s = kv.get_double("s", c.s);
  c.l = kv.get_double("l", c.l);
  c.intercept = kv.get_bool("intercept", c.intercept);
  c.standardise = kv.get_bool("standardise", c.standardise);
  c.mixed = kv.get_bool("mixed", c.mixed);
  if (kv.has("seed")) {
    const std::string v = *kv.get("seed");
    char* end = nullptr;
    c.seed = std::strtoull(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size())
      throw UserError("config key 'seed': '" + v + "' is not an integer");
  }

  if (kv.has("K-grid")) c.K_grid = int_list(*kv.get("K-grid"), "K-grid");
  if (kv.has("s-grid")) c.s_grid = kv.get_list("s-grid");
  if (kv.has("l-grid")) c.l_grid = kv.get_list("l-grid");
  c.folds = kv.get_int("folds", c.folds);
  c.holdout = kv.get_int("holdout", c.holdout);
  c.standardised_error = kv.get_bool("standardised-error", c.standardised_error);

  c.design = kv.get_string("design", c.design);
  c.tau = kv.get_double("tau", c.tau);
  c.stn = kv.get_double("stn", c.stn);
  c.sim_groups = kv.get_int("sim-groups", c.sim_groups);
  c.sim_group_size = kv.get_int("sim-group-size", c.sim_group_size);
  c.sim_p = kv.get_int("sim-p", c.sim_p);

  if (kv.has("plane")) {
    const auto axes = int_list(*kv.get("plane"), "plane");
    if (axes.size() != 2) throw UserError("config key 'plane' needs two axes");
    c.plane_a = axes[0];
    c.plane_b = axes[1];
  }
  c.cos_threshold = kv.get_double("cos-threshold", c.cos_threshold);
  c.jobs = kv.get_int("jobs", c.jobs);
  c.verbosity = kv.get_int("verbosity", c.verbosity);
  return c;
}

KeyValueConfig RunConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("command", command);
  kv.set("responses", responses);
  kv.set("predictors", predictors);
  kv.set("covariates", covariates);
  kv.set("groups-col", groups_col);
  kv.set("families", join_list(families));
  kv.set("out", out);
  kv.set("model", model_path);
  kv.set("K", std::to_string(K));
  kv.set("s", format_double(s));
  kv.set("l", format_double(l));
  kv.set("intercept", intercept ? "true" : "false");
  kv.set("standardise", standardise ? "true" : "false");
  kv.set("mixed", mixed ? "true" : "false");
  kv.set("seed", std::to_string(seed));
  kv.set("K-grid", join_numbers(K_grid));
  kv.set("s-grid", join_numbers(s_grid));
  kv.set("l-grid", join_numbers(l_grid));
  kv.set("folds", std::to_string(folds));
  kv.set("holdout", std::to_string(holdout));
  kv.set("standardised-error", standardised_error ? "true" : "false");
  kv.set("design", design);
  kv.set("tau", format_double(tau));
  kv.set("stn", format_double(stn));
  kv.set("sim-groups", std::to_string(sim_groups));
  kv.set("sim-group-size", std::to_string(sim_group_size));
  kv.set("sim-p", std::to_string(sim_p));
  kv.set("plane", std::to_string(plane_a) + "," + std::to_string(plane_b));
  kv.set("cos-threshold", format_double(cos_threshold));
  kv.set("jobs", std::to_string(jobs));
  kv.set("verbosity", std::to_string(verbosity));
  return kv;
}

ModelData ingest(const RunConfig& cfg) {
  if (cfg.responses.empty())
    throw UserError("no responses CSV given (key 'responses')");
  if (cfg.predictors.empty())
    throw UserError("no predictors CSV given (key 'predictors')");
  if (cfg.families.empty())
    throw UserError("no response families given (key 'families')");

  const CsvTable resp = read_csv(cfg.responses);
  const int gcol = resp.require(cfg.groups_col, cfg.responses);

  struct FamSpec {
    FamilyKind kind;
    std::string trials_col;
  };
  std::vector<FamSpec> specs;
  std::set<std::string> trials_cols;
  for (const auto& token : cfg.families) {
    const auto colon = token.find(':');
    if (colon != std::string::npos) {
      const std::string base = token.substr(0, colon);
      if (base != "binomial")
        throw UserError("family '" + token +
                        "': only binomial declares a trials column");
      const std::string col = token.substr(colon + 1);
      if (col.empty())
        throw UserError("family '" + token + "': empty trials column name");
      specs.push_back({FamilyKind::Binomial, col});
      trials_cols.insert(col);
    } else {
      const FamilyKind kind = family_from_name(token);
      if (kind == FamilyKind::Binomial)
        throw UserError(
            "binomial responses need a trials column: use binomial:<column>");
      specs.push_back({kind, ""});
    }
  }

  std::vector<int> ycols;
  for (int j = 0; j < resp.n_cols(); ++j)
    if (j != gcol && trials_cols.count(resp.header[j]) == 0) ycols.push_back(j);
  if (ycols.size() != specs.size())
    throw UserError(cfg.responses + " has " + std::to_string(ycols.size()) +
                    " response columns but " + std::to_string(specs.size()) +
                    " families were declared");

  ModelData data;
  const int n = resp.n_rows();
  const int q = static_cast<int>(specs.size());
  data.Y.resize(n, q);
  for (int k = 0; k < q; ++k) {
    data.Y.col(k) = numeric_column(resp, ycols[k], cfg.responses);
    data.response_names.push_back(resp.header[ycols[k]]);
    if (specs[k].kind == FamilyKind::Binomial) {
      const int tcol = resp.require(specs[k].trials_col, cfg.responses);
      data.families.push_back(
          ResponseFamily::binomial(numeric_column(resp, tcol, cfg.responses)));
    } else if (specs[k].kind == FamilyKind::Gaussian) {
      data.families.push_back(ResponseFamily::gaussian());
    } else if (specs[k].kind == FamilyKind::Bernoulli) {
      data.families.push_back(ResponseFamily::bernoulli());
    } else {
      data.families.push_back(ResponseFamily::poisson());
    }
  }

  // group labels -> contiguous indices, first appearance first
  data.groups.group_of.resize(n);
  for (int i = 0; i < n; ++i) {
    const std::string& label = resp.rows[i][gcol];
    int id = -1;
    for (size_t g = 0; g < data.group_names.size(); ++g)
      if (data.group_names[g] == label) {
        id = static_cast<int>(g);
        break;
      }
    if (id < 0) {
      id = static_cast<int>(data.group_names.size());
      data.group_names.push_back(label);
    }
    data.groups.group_of[i] = id;
  }
  data.groups.n_groups = static_cast<int>(data.group_names.size());

  const CsvTable xtab = read_csv(cfg.predictors);
  if (xtab.n_rows() != n)
    throw UserError(cfg.predictors + " has " + std::to_string(xtab.n_rows()) +
                    " rows but " + cfg.responses + " has " + std::to_string(n));
  data.X.resize(n, xtab.n_cols());
  for (int j = 0; j < xtab.n_cols(); ++j) {
    data.X.col(j) = numeric_column(xtab, j, cfg.predictors);
    data.x_names.push_back(xtab.header[j]);
  }

  if (!cfg.covariates.empty()) {
    const CsvTable atab = read_csv(cfg.covariates);
    if (atab.n_rows() != n)
      throw UserError(cfg.covariates + " has " + std::to_string(atab.n_rows()) +
                      " rows but " + cfg.responses + " has " + std::to_string(n));
    data.A.resize(n, atab.n_cols());
    for (int j = 0; j < atab.n_cols(); ++j) {
      data.A.col(j) = numeric_column(atab, j, cfg.covariates);
      data.a_names.push_back(atab.header[j]);
    }
  } else {
    data.A.resize(n, 0);
  }

  data.validate();
  for (int k = 0; k < q; ++k)
    data.families[k].validate(data.Y.col(k), data.response_names[k]);
  return data;
}

std::vector<PlaneRow> export_plot_data(const FittedModel& model, int axis_a,
                                       int axis_b, double cos_threshold) {
  const int K = model.n_components();
  if (K == 0) throw UserError("model has no components to plot");
  if (axis_a < 1 || axis_a > K || axis_b < 1 || axis_b > K)
    throw UserError("plane axis out of range: model has " + std::to_string(K) +
                    " components");
  const bool one_d = axis_a == axis_b;
  const int a = axis_a - 1, b = axis_b - 1;

  std::vector<PlaneRow> rows;
  for (int j = 0; j < model.correlations.rows(); ++j) {
    PlaneRow r;
    r.kind = "variable";
    r.name = model.x_names[j];
    r.x = model.correlations(j, a);
    r.y = one_d ? 0.0 : model.correlations(j, b);
    r.kept = std::hypot(r.x, r.y) > cos_threshold;
    rows.push_back(r);
  }
  // Cosines of the component-borne part of each linear predictor with
  // the two axes: components are orthonormal in the observation metric,
  // so the coordinates are the fitted component coefficients.
  for (int k = 0; k < model.q(); ++k) {
    PlaneRow r;
    r.kind = "response";
    r.name = model.response_names[k];
    const double norm = model.gamma.row(k).norm();
    if (norm > 1e-300) {
      r.x = model.gamma(k, a) / norm;
      r.y = one_d ? 0.0 : model.gamma(k, b) / norm;
    }
    r.kept = std::hypot(r.x, r.y) > cos_threshold;
    rows.push_back(r);
  }
  PlaneRow ia;
  ia.kind = "inertia";
  ia.name = "f" + std::to_string(axis_a);
  ia.x = model.inertia_pct[a];
  rows.push_back(ia);
  if (!one_d) {
    PlaneRow ib;
    ib.kind = "inertia";
    ib.name = "f" + std::to_string(axis_b);
    ib.x = model.inertia_pct[b];
    rows.push_back(ib);
  }
  return rows;
}

namespace {

std::string plane_csv(const std::vector<PlaneRow>& rows) {
  CsvTable t;
  t.header = {"kind", "name", "cos1", "cos2", "kept"};
  for (const auto& r : rows)
    t.rows.push_back({r.kind, r.name, format_double(r.x), format_double(r.y),
                      r.kept ? "1" : "0"});
  return format_csv(t);
}

// Computed artifacts are written together at the end of a run; if any
// write fails the ones already on disk are removed.
class ArtifactSet {
 public:
  explicit ArtifactSet(const std::string& dir) : dir_(dir) {}
  void add(const std::string& name, std::string content) {
    items_.emplace_back(name, std::move(content));
  }
  std::vector<std::string> commit() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    std::vector<std::string> written;
    try {
      for (const auto& [name, content] : items_) {
        const fs::path path = dir_ / name;
        std::ofstream f(path, std::ios::binary);
        f << content;
        f.close();
        if (!f) throw UserError("cannot write " + path.string());
        written.push_back(path.string());
      }
    } catch (...) {
      for (const auto& p : written) fs::remove(p);
      throw;
    }
    return written;
  }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> items_;
};

void report_written(const std::vector<std::string>& paths) {
  for (const auto& p : paths) std::cout << "wrote " << p << "\n";
}

Hyperparams hyperparams_from(const RunConfig& cfg) {
  Hyperparams hp;
  hp.K = cfg.K;
  hp.s = cfg.s;
  hp.l = cfg.l;
  hp.intercept = cfg.intercept;
  hp.standardise = cfg.standardise;
  hp.validate();
  return hp;
}

std::string coefficients_csv(const FittedModel& m, bool mixed) {
  CsvTable t;
  t.header = {"term"};
  for (const auto& name : m.response_names) t.header.push_back(name);
  const int q = m.q();
  auto row = [&](const std::string& term, auto value) {
    std::vector<std::string> r{term};
    for (int k = 0; k < q; ++k) r.push_back(format_double(value(k)));
    t.rows.push_back(r);
  };
  row("(intercept)", [&](int k) { return m.beta0[k]; });
  for (int j = 0; j < m.beta.cols(); ++j)
    row(m.x_names[j], [&](int k) { return m.beta(k, j); });
  const int a_off = m.intercept ? 1 : 0;
  for (size_t j = 0; j < m.a_names.size(); ++j)
    row(m.a_names[j],
        [&](int k) { return m.delta(k, a_off + static_cast<int>(j)); });
  if (mixed) row("sigma2", [&](int k) { return m.sigma2[k]; });
  row("dispersion", [&](int k) { return m.dispersion[k]; });
  return format_csv(t);
}

void log_convergence(const RunConfig& cfg, const FittedModel& m) {
  if (cfg.verbosity < 1) return;
  std::cerr << "components: " << m.report.realised_K << " of "
            << m.report.requested_K << " requested\n";
  for (size_t h = 0; h < m.report.components.size(); ++h) {
    const auto& c = m.report.components[h];
    std::cerr << "  component " << h + 1 << ": " << c.iterations
              << " iterations, " << (c.converged ? "converged" : "NOT converged")
              << ", criterion " << c.criterion << "\n";
  }
  std::cerr << "final refit: " << m.report.refit_iterations << " iterations, "
            << (m.report.refit_converged ? "converged" : "NOT converged")
            << "\n";
  for (const auto& note : m.report.notes) std::cerr << "note: " << note << "\n";
}

}  // namespace

void run_fit(const RunConfig& cfg) {
  const ModelData data = ingest(cfg);
  const Hyperparams hp = hyperparams_from(cfg);
  const FittedModel model = cfg.mixed ? fit(data, hp) : fit_fixed(data, hp);
  log_convergence(cfg, model);

  ArtifactSet arts(cfg.out);
  arts.add("model.json", to_json(model));
  arts.add("coefficients.csv", coefficients_csv(model, cfg.mixed));
  if (model.n_components() > 0) {
    const int axis_b = std::min(2, model.n_components());
    arts.add("component_plane.csv",
             plane_csv(export_plot_data(model, 1, axis_b, cfg.cos_threshold)));
  }
  report_written(arts.commit());
}

void run_cv(const RunConfig& cfg) {
  const ModelData data = ingest(cfg);
  Hyperparams base = hyperparams_from(cfg);
  GridSpec grid;
  grid.K = cfg.K_grid;
  grid.s = cfg.s_grid;
  grid.l = cfg.l_grid;
  CvPlan plan;
  plan.n_folds = cfg.folds;
  plan.holdout_per_group = cfg.holdout;
  plan.seed = cfg.seed;
  plan.standardised_error = cfg.standardised_error;

  const GridResult res = grid_search(data, grid, plan, base);

  CsvTable surface;
  surface.header = {"s", "l", "K", "error", "failed"};
  for (const auto& cell : res.cells)
    surface.rows.push_back({format_double(cell.s), format_double(cell.l),
                            std::to_string(cell.K), format_double(cell.error),
                            cell.failed ? "1" : "0"});

  json summary;
  summary["K_star"] = res.K_star;
  summary["s_star"] = res.s_star;
  summary["l_star"] = res.l_star;
  summary["error"] = res.best_error;
  summary["folds"] = cfg.folds;
  summary["holdout_per_group"] = cfg.holdout;
  summary["seed"] = cfg.seed;
  summary["standardised_error"] = cfg.standardised_error;

  ArtifactSet arts(cfg.out);
  arts.add("error_surface.csv", format_csv(surface));
  arts.add("cv_summary.json", summary.dump(2) + "\n");
  report_written(arts.commit());
}

void run_simulate(const RunConfig& cfg) {
  SimDesign design;
  design.kind = sim_kind_from_name(cfg.design);
  design.tau = cfg.tau;
  design.stn = cfg.stn;
  design.n_groups = cfg.sim_groups;
  design.group_size = cfg.sim_group_size;
  design.p = cfg.sim_p;
  design.seed = cfg.seed;
  const SimResult sim = simulate(design);
  const ModelData& data = sim.data;

  CsvTable resp;
  resp.header = {"group"};
  for (const auto& name : data.response_names) resp.header.push_back(name);
  std::vector<std::string> fam_tokens;
  std::vector<int> trials_for;  // response index with a trials column
  for (int k = 0; k < data.q(); ++k) {
    const auto& fam = data.families[k];
    if (fam.kind == FamilyKind::Binomial) {
      const std::string col = data.response_names[k] + "_trials";
      resp.header.push_back(col);
      trials_for.push_back(k);
      fam_tokens.push_back("binomial:" + col);
    } else {
      fam_tokens.push_back(family_name(fam.kind));
    }
  }
  for (int i = 0; i < data.n(); ++i) {
    std::vector<std::string> row{data.group_names[data.groups.group_of[i]]};
    for (int k = 0; k < data.q(); ++k) row.push_back(format_double(data.Y(i, k)));
    for (const int k : trials_for)
      row.push_back(format_double(data.families[k].trials[i]));
    resp.rows.push_back(row);
  }

  CsvTable pred;
  pred.header = data.x_names;
  for (int i = 0; i < data.n(); ++i) {
    std::vector<std::string> row;
    for (int j = 0; j < data.p(); ++j) row.push_back(format_double(data.X(i, j)));
    pred.rows.push_back(row);
  }

  json truths;
  truths["design"] = cfg.design;
  truths["seed"] = cfg.seed;
  if (design.kind == SimKind::LatentBundle)
    truths["stn"] = cfg.stn;
  else
    truths["tau"] = cfg.tau;
  truths["sigma2"] = std::vector<double>(
      sim.truth.sigma2.data(), sim.truth.sigma2.data() + sim.truth.sigma2.size());
  if (!sim.truth.beta.empty()) {
    json beta = json::array();
    for (const auto& b : sim.truth.beta)
      beta.push_back(std::vector<double>(b.data(), b.data() + b.size()));
    truths["beta"] = beta;
  }
  auto columns = [](const Mat& m) {
    json out = json::array();
    for (int j = 0; j < m.cols(); ++j) {
      const Vec c = m.col(j);
      out.push_back(std::vector<double>(c.data(), c.data() + c.size()));
    }
    return out;
  };
  truths["xi"] = columns(sim.truth.xi.transpose());       // one array per response
  truths["latents"] = columns(sim.truth.latents);
  truths["targets"] = columns(sim.truth.targets);

  RunConfig refit;
  refit.command = "fit";
  refit.responses = "responses.csv";
  refit.predictors = "predictors.csv";
  refit.families = fam_tokens;
  refit.groups_col = "group";
  refit.out = ".";

  ArtifactSet arts(cfg.out);
  arts.add("responses.csv", format_csv(resp));
  arts.add("predictors.csv", format_csv(pred));
  arts.add("truths.json", truths.dump(2) + "\n");
  arts.add("ingest.cfg", refit.to_kv().serialise());
  report_written(arts.commit());
}

void run_export_plot(const RunConfig& cfg) {
  if (cfg.model_path.empty())
    throw UserError("no fitted model given (key 'model')");
  std::ifstream f(cfg.model_path, std::ios::binary);
  if (!f) throw UserError("cannot read " + cfg.model_path);
  std::stringstream buf;
  buf << f.rdbuf();
  const FittedModel model = model_from_json(buf.str());

  ArtifactSet arts(cfg.out);
  arts.add("component_plane.csv",
           plane_csv(export_plot_data(model, cfg.plane_a, cfg.plane_b,
                                      cfg.cos_threshold)));
  report_written(arts.commit());
}

namespace {

// Ingestion/data options shared by fit and cv.
struct DataFlags {
  std::string responses, predictors, covariates, groups_col, families;
  void attach(CLI::App* sub) {
    sub->add_option("--responses", responses,
                    "CSV with the group column and the response columns");
    sub->add_option("--predictors", predictors, "CSV with the predictors X");
    sub->add_option("--covariates", covariates,
                    "CSV with extra covariates A (optional)");
    sub->add_option("--groups-col", groups_col, "group column name");
    sub->add_option(
        "--families", families,
        "comma list (one per response column): gaussian, bernoulli, "
        "poisson or binomial:<trials column>");
  }
  void apply(const CLI::App* sub, RunConfig& cfg) const {
    if (sub->count("--responses")) cfg.responses = responses;
    if (sub->count("--predictors")) cfg.predictors = predictors;
    if (sub->count("--covariates")) cfg.covariates = covariates;
    if (sub->count("--groups-col")) cfg.groups_col = groups_col;
    if (sub->count("--families")) cfg.families = split_list(families);
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "scglr: supervised-component regularisation of multivariate "
      "generalised linear mixed models on grouped data"};
  app.require_subcommand(1);

  // options common to all subcommands.  Counting flags must not share one
  // target across subcommands (the shared binding is never written and its
  // count() reads 1 even when absent), so each subcommand gets its own
  // verbosity counter and the parsed value, not count(), is the presence test.
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int jobs = 0;
  std::array<int, 4> verbosity{};
  int next_verbosity = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "flat key = value configuration file (flags override it)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--jobs", jobs, "max parallel threads (0 = all cores)")
        ->envname("SCGLR_JOBS");
    sub->add_flag("-v,--verbose", verbosity.at(next_verbosity++),
                  "log details to stderr");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model");
  DataFlags fit_data;
  fit_data.attach(fit_cmd);
  int K = 0;
  double s = 0, l = 0, cos_threshold = 0;
  bool intercept = true, standardise = true, mixed = true;
  fit_cmd->add_option("--K", K, "number of components");
  fit_cmd->add_option("--s", s, "structural relevance weight in [0,1]");
  fit_cmd->add_option("--l", l, "bundle locality (>= 1)");
  fit_cmd->add_flag("--intercept,!--no-intercept", intercept,
                    "append an intercept to the covariates");
  fit_cmd->add_flag("--standardise,!--no-standardise", standardise,
                    "centre and scale the predictors");
  fit_cmd->add_flag("--mixed,!--fixed", mixed,
                    "include a random intercept per group");
  fit_cmd->add_option("--cos-threshold", cos_threshold,
                      "plane cosine threshold for the kept flag");
  add_common(fit_cmd);

  CLI::App* cv_cmd =
      app.add_subcommand("cv", "cross-validate the hyperparameter grid");
  DataFlags cv_data;
  cv_data.attach(cv_cmd);
  std::string K_grid, s_grid, l_grid;
  int folds = 0, holdout = 0;
  bool standardised_error = true;
  cv_cmd->add_option("--K-grid", K_grid, "components grid, e.g. 1:8 or 1,2,4");
  cv_cmd->add_option("--s-grid", s_grid, "trade-off grid, e.g. 0.1,0.5,0.9");
  cv_cmd->add_option("--l-grid", l_grid, "locality grid, e.g. 1,2,4");
  cv_cmd->add_option("--folds", folds, "number of folds");
  cv_cmd->add_option("--holdout", holdout, "held-out rows per group per fold");
  cv_cmd->add_flag("--standardised-error,!--raw-error", standardised_error,
                   "divide squared errors by the predicted variance");
  cv_cmd->add_option("--l", l, "locality when no grid is given");
  cv_cmd->add_flag("--intercept,!--no-intercept", intercept,
                   "append an intercept to the covariates");
  add_common(cv_cmd);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "draw a study data set");
  std::string design;
  double tau = 0, stn = 0;
  int sim_groups = 0, sim_group_size = 0, sim_p = 0;
  sim_cmd->add_option("--design", design,
                      "gauss-bundles | bern-pois | binom-pois | "
                      "latent-bundle | highdim");
  sim_cmd->add_option("--tau", tau, "within-bundle correlation");
  sim_cmd->add_option("--stn", stn, "signal-to-noise ratio (latent-bundle)");
  sim_cmd->add_option("--groups", sim_groups, "number of groups");
  sim_cmd->add_option("--group-size", sim_group_size, "rows per group");
  sim_cmd->add_option("--p", sim_p, "predictor count (highdim: 150 or 200)");
  add_common(sim_cmd);

  CLI::App* plot_cmd = app.add_subcommand(
      "export-plot", "emit component-plane data from a fitted model");
  std::string model_path, plane;
  plot_cmd->add_option("--model", model_path, "fitted model JSON");
  plot_cmd->add_option("--plane", plane, "component axes, e.g. 1,2");
  plot_cmd->add_option("--cos-threshold", cos_threshold,
                       "plane cosine threshold for the kept flag");
  add_common(plot_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();

    RunConfig cfg;
    if (sub->count("--config"))
      cfg = RunConfig::from_kv(KeyValueConfig::load(config_path));
    cfg.command = sub->get_name();
    if (sub->count("--out")) cfg.out = out_dir;
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--jobs")) cfg.jobs = jobs;
    const int verbose_count =
        verbosity[0] + verbosity[1] + verbosity[2] + verbosity[3];
    if (verbose_count > 0) cfg.verbosity = verbose_count;

    if (sub == fit_cmd || sub == cv_cmd) {
      (sub == fit_cmd ? fit_data : cv_data).apply(sub, cfg);
      if (sub->count("--l")) cfg.l = l;
      if (sub->count("--intercept")) cfg.intercept = intercept;
    }
    if (sub == fit_cmd) {
      if (sub->count("--K")) cfg.K = K;
      if (sub->count("--s")) cfg.s = s;
      if (sub->count("--standardise")) cfg.standardise = standardise;
      if (sub->count("--mixed")) cfg.mixed = mixed;
      if (sub->count("--cos-threshold")) cfg.cos_threshold = cos_threshold;
    } else if (sub == cv_cmd) {
      if (sub->count("--K-grid")) cfg.K_grid = int_list(K_grid, "K-grid");
      if (sub->count("--s-grid")) cfg.s_grid = number_list(s_grid, "s-grid");
      if (sub->count("--l-grid")) cfg.l_grid = number_list(l_grid, "l-grid");
      if (sub->count("--folds")) cfg.folds = folds;
      if (sub->count("--holdout")) cfg.holdout = holdout;
      if (sub->count("--standardised-error"))
        cfg.standardised_error = standardised_error;
    } else if (sub == sim_cmd) {
      if (sub->count("--design")) cfg.design = design;
      if (sub->count("--tau")) cfg.tau = tau;
      if (sub->count("--stn")) cfg.stn = stn;
      if (sub->count("--groups")) cfg.sim_groups = sim_groups;
      if (sub->count("--group-size")) cfg.sim_group_size = sim_group_size;
      if (sub->count("--p")) cfg.sim_p = sim_p;
    } else if (sub == plot_cmd) {
      if (sub->count("--model")) cfg.model_path = model_path;
      if (sub->count("--plane")) {
        const auto axes = int_list(plane, "plane");
        if (axes.size() != 2) throw UserError("--plane needs two axes, e.g. 1,2");
        cfg.plane_a = axes[0];
        cfg.plane_b = axes[1];
      }
      if (sub->count("--cos-threshold")) cfg.cos_threshold = cos_threshold;
    }

    set_job_cap(cfg.jobs);
    if (cfg.command == "fit") {
      run_fit(cfg);
    } else if (cfg.command == "cv") {
      run_cv(cfg);
    } else if (cfg.command == "simulate") {
      run_simulate(cfg);
    } else if (cfg.command == "export-plot") {
      run_export_plot(cfg);
    } else {
      throw UserError("unknown command '" + cfg.command + "'");
    }
    return 0;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace scglr
