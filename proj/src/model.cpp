#include "scglr/model.hpp"

#include <json.hpp>

#include "scglr/errors.hpp"

namespace scglr {

using nlohmann::json;

void ModelData::validate() const {
  const int nn = n();
  if (nn == 0) throw UserError("data set has no rows");
  if (static_cast<int>(families.size()) != q())
    throw UserError("one family per response required (got " +
                    std::to_string(families.size()) + " for " +
                    std::to_string(q()) + " responses)");
  if (X.rows() != nn) throw UserError("X row count != response row count");
  if (A.cols() > 0 && A.rows() != nn)
    throw UserError("A row count != response row count");
  if (groups.n() != nn) throw UserError("group vector length != row count");
  groups.validate();
  for (int k = 0; k < q(); ++k) {
    const std::string name = k < static_cast<int>(response_names.size())
                                 ? response_names[k]
                                 : "y" + std::to_string(k + 1);
    families[k].validate(Y.col(k), name);
  }
  if (!X.allFinite()) throw UserError("X contains non-finite values");
  if (A.cols() > 0 && !A.allFinite())
    throw UserError("A contains non-finite values");
}

ModelData ModelData::subset_rows(const std::vector<int>& rows) const {
  ModelData out;
  const int m = static_cast<int>(rows.size());
  out.Y.resize(m, Y.cols());
  out.X.resize(m, X.cols());
  out.A.resize(m, A.cols());
  out.groups.group_of.resize(m);
  out.groups.n_groups = groups.n_groups;
  for (int i = 0; i < m; ++i) {
    out.Y.row(i) = Y.row(rows[i]);
    out.X.row(i) = X.row(rows[i]);
    if (A.cols() > 0) out.A.row(i) = A.row(rows[i]);
    out.groups.group_of[i] = groups.group_of[rows[i]];
  }
  out.families = families;
  for (size_t k = 0; k < out.families.size(); ++k) {
    auto& fam = out.families[k];
    if (fam.kind == FamilyKind::Binomial) {
      Vec t(m);
      for (int i = 0; i < m; ++i) t[i] = fam.trials[rows[i]];
      fam.trials = std::move(t);
    }
  }
  out.response_names = response_names;
  out.x_names = x_names;
  out.a_names = a_names;
  out.group_names = group_names;
  return out;
}

void Hyperparams::validate() const {
  if (K < 0) throw UserError("K must be >= 0");
  if (s < 0.0 || s > 1.0) throw UserError("s must lie in [0, 1]");
  if (l < 1.0) throw UserError("l must be >= 1");
  if (!(outer_tol > 0.0) || outer_max_iter < 1)
    throw UserError("invalid outer-loop controls");
  if (!(sigma2_init > 0.0)) throw UserError("sigma2_init must be positive");
}

bool ConvergenceReport::converged() const {
  for (const auto& c : components)
    if (!c.converged) return false;
  return refit_converged;
}

namespace {

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Vec vec_from_json(const json& a) {
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

Mat mat_from_json(const json& j) {
  const int r = j.at("rows").get<int>();
  const int c = j.at("cols").get<int>();
  Mat m(r, c);
  const json& rows = j.at("data");
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = rows[i][k].get<double>();
  return m;
}

json family_to_json(const ResponseFamily& f) {
  json j{{"kind", family_name(f.kind)},
         {"dispersion", f.dispersion},
         {"estimate_dispersion", f.estimate_dispersion}};
  if (f.kind == FamilyKind::Binomial) j["trials"] = vec_to_json(f.trials);
  return j;
}

ResponseFamily family_from_json(const json& j) {
  ResponseFamily f;
  f.kind = family_from_name(j.at("kind").get<std::string>());
  f.dispersion = j.at("dispersion").get<double>();
  f.estimate_dispersion = j.at("estimate_dispersion").get<bool>();
  if (j.contains("trials")) f.trials = vec_from_json(j.at("trials"));
  return f;
}

}  // namespace

std::string to_json(const FittedModel& m) {
  json j;
  j["schema"] = FittedModel::kSchema;
  j["response_names"] = m.response_names;
  j["x_names"] = m.x_names;
  j["a_names"] = m.a_names;
  j["group_names"] = m.group_names;
  json fams = json::array();
  for (const auto& f : m.families) fams.push_back(family_to_json(f));
  j["families"] = std::move(fams);
  j["K"] = m.K;
  j["s"] = m.s;
  j["l"] = m.l;
  j["intercept"] = m.intercept;
  j["x_center"] = vec_to_json(m.x_center);
  j["x_scale"] = vec_to_json(m.x_scale);
  j["V"] = mat_to_json(m.V);
  j["eigvals"] = vec_to_json(m.eigvals);
  j["rank"] = m.rank;
  j["u"] = mat_to_json(m.u);
  j["loadings"] = mat_to_json(m.loadings);
  j["F"] = mat_to_json(m.F);
  j["gamma"] = mat_to_json(m.gamma);
  j["delta"] = mat_to_json(m.delta);
  j["xi"] = mat_to_json(m.xi);
  j["sigma2"] = vec_to_json(m.sigma2);
  j["dispersion"] = vec_to_json(m.dispersion);
  j["beta"] = mat_to_json(m.beta);
  j["beta0"] = vec_to_json(m.beta0);
  j["inertia_pct"] = vec_to_json(m.inertia_pct);
  j["correlations"] = mat_to_json(m.correlations);

  json rep;
  rep["requested_K"] = m.report.requested_K;
  rep["realised_K"] = m.report.realised_K;
  rep["refit_iterations"] = m.report.refit_iterations;
  rep["refit_converged"] = m.report.refit_converged;
  rep["notes"] = m.report.notes;
  json comps = json::array();
  for (const auto& c : m.report.components)
    comps.push_back(json{{"iterations", c.iterations},
                         {"converged", c.converged},
                         {"last_change", c.last_change},
                         {"criterion", c.criterion},
                         {"psi_gain", c.psi_gain}});
  rep["components"] = std::move(comps);
  j["report"] = std::move(rep);
  return j.dump(2);
}

FittedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UserError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != FittedModel::kSchema)
      throw UserError("unsupported model schema '" +
                      j.at("schema").get<std::string>() + "'");
    FittedModel m;
    m.response_names = j.at("response_names").get<std::vector<std::string>>();
    m.x_names = j.at("x_names").get<std::vector<std::string>>();
    m.a_names = j.at("a_names").get<std::vector<std::string>>();
    m.group_names = j.at("group_names").get<std::vector<std::string>>();
    for (const auto& f : j.at("families")) m.families.push_back(family_from_json(f));
    m.K = j.at("K").get<int>();
    m.s = j.at("s").get<double>();
    m.l = j.at("l").get<double>();
    m.intercept = j.at("intercept").get<bool>();
    m.x_center = vec_from_json(j.at("x_center"));
    m.x_scale = vec_from_json(j.at("x_scale"));
    m.V = mat_from_json(j.at("V"));
    m.eigvals = vec_from_json(j.at("eigvals"));
    m.rank = j.at("rank").get<int>();
    m.u = mat_from_json(j.at("u"));
    m.loadings = mat_from_json(j.at("loadings"));
    m.F = mat_from_json(j.at("F"));
    m.gamma = mat_from_json(j.at("gamma"));
    m.delta = mat_from_json(j.at("delta"));
    m.xi = mat_from_json(j.at("xi"));
    m.sigma2 = vec_from_json(j.at("sigma2"));
    m.dispersion = vec_from_json(j.at("dispersion"));
    m.beta = mat_from_json(j.at("beta"));
    m.beta0 = vec_from_json(j.at("beta0"));
    m.inertia_pct = vec_from_json(j.at("inertia_pct"));
    m.correlations = mat_from_json(j.at("correlations"));
    const json& rep = j.at("report");
    m.report.requested_K = rep.at("requested_K").get<int>();
    m.report.realised_K = rep.at("realised_K").get<int>();
    m.report.refit_iterations = rep.at("refit_iterations").get<int>();
    m.report.refit_converged = rep.at("refit_converged").get<bool>();
    m.report.notes = rep.at("notes").get<std::vector<std::string>>();
    for (const auto& c : rep.at("components")) {
      ComponentReport cr;
      cr.iterations = c.at("iterations").get<int>();
      cr.converged = c.at("converged").get<bool>();
      cr.last_change = c.at("last_change").get<double>();
      cr.criterion = c.at("criterion").get<double>();
      cr.psi_gain = c.at("psi_gain").get<double>();
      m.report.components.push_back(cr);
    }
    return m;
  } catch (const json::exception& e) {
    throw UserError(std::string("model file is missing required fields: ") +
                    e.what());
  }
}

Predictions predict(const FittedModel& model, const Mat& X_new,
                    const Mat& A_new, const std::vector<int>& groups_new,
                    PredictMode mode, const std::vector<Vec>& trials_new) {
  const int n_new = static_cast<int>(X_new.rows());
  const int q = model.q();
  if (X_new.cols() != model.beta.cols())
    throw UserError("predict: X has " + std::to_string(X_new.cols()) +
                    " columns, model expects " +
                    std::to_string(model.beta.cols()));
  const int ra = static_cast<int>(model.delta.cols()) - (model.intercept ? 1 : 0);
  if (A_new.cols() != ra)
    throw UserError("predict: A has " + std::to_string(A_new.cols()) +
                    " columns, model expects " + std::to_string(ra));
  if (mode == PredictMode::Conditional) {
    if (static_cast<int>(groups_new.size()) != n_new)
      throw UserError("predict: conditional mode needs one group per row");
    for (int i = 0; i < n_new; ++i)
      if (groups_new[i] < 0 || groups_new[i] >= model.xi.cols())
        throw UserError("predict: row " + std::to_string(i) +
                        " refers to a group the model has not seen");
  }

  Predictions out;
  out.eta.resize(n_new, q);
  out.mu.resize(n_new, q);
  for (int k = 0; k < q; ++k) {
    Vec eta = Vec::Constant(n_new, model.beta0[k]);
    eta.noalias() += X_new * model.beta.row(k).transpose();
    int dcol = 0;
    if (model.intercept) dcol = 1;  // beta0 already contains it
    for (int j = 0; j < ra; ++j)
      eta.noalias() += model.delta(k, dcol + j) * A_new.col(j);
    if (mode == PredictMode::Conditional)
      for (int i = 0; i < n_new; ++i) eta[i] += model.xi(k, groups_new[i]);
    out.eta.col(k) = eta;

    ResponseFamily fam = model.families[k];
    if (fam.kind == FamilyKind::Binomial) {
      if (static_cast<int>(trials_new.size()) <= k || trials_new[k].size() != n_new)
        throw UserError("predict: binomial response '" +
                        model.response_names[k] +
                        "' needs trial counts for the new rows");
      fam.trials = trials_new[k];
    }
    out.mu.col(k) = fam.link_inverse(eta);
  }
  return out;
}

}  // namespace scglr
