#include "bqn/trace_io.hpp"

#include <iomanip>

#include "json.hpp"

namespace bqn::trace_io {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

void write_trace_csv(std::ostream& os, const optimizer::OptimTrace& t) {
  os << "# " << kCsvSchemaVersion << " optim-trace\n";
  os << "iter,f,grad_norm,step_len,method,event\n";
  os << std::setprecision(17);
  for (const auto& r : t.records) {
    os << r.iter << ',' << r.f << ',' << r.grad_norm << ',' << r.step_len << ',' << r.method
       << ',' << r.event << '\n';
  }
}

std::string trace_to_json(const optimizer::OptimTrace& t) {
  json out;
  out["final_status"] = t.final_status;
  out["converged"] = t.converged;
  out["total_evaluations"] = t.total_evaluations;
  out["linesearches"] = t.linesearches;
  out["final_f"] = t.final_f;
  out["final_grad_norm"] = t.final_grad_norm;
  out["final_x"] = vector_to_json(t.final_x);
  json recs = json::array();
  for (const auto& r : t.records) {
    recs.push_back({{"iter", r.iter},
                    {"x", vector_to_json(r.x)},
                    {"f", r.f},
                    {"grad_norm", r.grad_norm},
                    {"step_len", r.step_len},
                    {"method", r.method},
                    {"event", r.event},
                    {"cumulative_evals", r.cumulative_evals}});
  }
  out["records"] = std::move(recs);
  return out.dump(2);
}

std::string summary_to_json(const optimizer::OptimTrace& t) {
  json out;
  out["final_f"] = t.final_f;
  out["final_grad_norm"] = t.final_grad_norm;
  out["linesearches"] = t.linesearches;
  out["evaluations"] = t.total_evaluations;
  out["status"] = t.final_status;
  out["converged"] = t.converged;
  return out.dump(2);
}

std::string gamma_problem_to_json(const objectives::GammaProblem& p) {
  json out;
  out["alphas"] = vector_to_json(p.alphas());
  out["betas"] = vector_to_json(p.betas());
  out["seed"] = p.seed();
  return out.dump(2);
}

objectives::GammaProblem gamma_problem_from_json(const std::string& text) {
  const json j = json::parse(text);
  return objectives::GammaProblem(vector_from_json(j.at("alphas")),
                                  vector_from_json(j.at("betas")),
                                  j.at("seed").get<std::uint64_t>());
}

std::string gp_snapshot_to_json(const npmodel::GpState& g) {
  json out;
  out["dim"] = g.dim();
  out["vscale"] = matrix_to_json(g.hypers().vscale);
  out["lengthscale_sq"] = vector_to_json(g.hypers().lengthscale_sq);
  out["prior_mean_diag"] = vector_to_json(g.prior_mean_diag());
  out["form"] =
      g.config().form == npmodel::PosteriorForm::kThreeTerm ? "three-term" : "two-term";
  json obs = json::array();
  for (const auto& o : g.observations()) {
    obs.push_back({{"start", vector_to_json(o.start)},
                   {"end", vector_to_json(o.finish)},
                   {"y", vector_to_json(o.y)}});
  }
  out["observations"] = std::move(obs);
  return out.dump(2);
}

npmodel::GpState gp_snapshot_from_json(const std::string& text) {
  const json j = json::parse(text);
  const int dim = j.at("dim").get<int>();
  npmodel::KernelHypers hypers;
  hypers.vscale = matrix_from_json(j.at("vscale"));
  hypers.lengthscale_sq = vector_from_json(j.at("lengthscale_sq"));
  npmodel::GpConfig cfg;
  if (j.at("form").get<std::string>() == "two-term") {
    cfg.form = npmodel::PosteriorForm::kTwoTerm;
  }
  npmodel::GpState g(dim, std::move(hypers), vector_from_json(j.at("prior_mean_diag")), cfg);
  for (const auto& o : j.at("observations")) {
    g.add_observation(npmodel::LineObservation(vector_from_json(o.at("start")),
                                               vector_from_json(o.at("end")),
                                               vector_from_json(o.at("y"))));
  }
  return g;
}

}  // namespace bqn::trace_io
