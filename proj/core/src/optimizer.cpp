#include "bqn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "bqn/rng.hpp"

namespace bqn::optimizer {

std::string method_name(Method m) {
  switch (m) {
    case Method::kBroyden: return "broyden";
    case Method::kSr1: return "sr1";
    case Method::kPsb: return "psb";
    case Method::kDfp: return "dfp";
    case Method::kBfgs: return "bfgs";
    case Method::kNpqn: return "npqn";
  }
  return "unknown";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "broyden") return Method::kBroyden;
  if (name == "sr1") return Method::kSr1;
  if (name == "psb") return Method::kPsb;
  if (name == "dfp") return Method::kDfp;
  if (name == "bfgs") return Method::kBfgs;
  if (name == "npqn") return Method::kNpqn;
  return std::nullopt;
}

void OptimConfig::validate() const {
  if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw std::invalid_argument("OptimConfig: need 0 < c1 < c2 < 1");
  }
  if (!(grad_tol > 0.0)) throw std::invalid_argument("OptimConfig: grad_tol must be positive");
  if (max_linesearches < 1) throw std::invalid_argument("OptimConfig: budget must be >= 1");
  if (max_ls_evals < 2) throw std::invalid_argument("OptimConfig: max_ls_evals must be >= 2");
  if (mmax < 2) throw std::invalid_argument("OptimConfig: mmax must be >= 2");
  if (handoff_window < 1 || !(handoff_rel_decrease > 0.0) || !(handoff_cond_limit > 1.0)) {
    throw std::invalid_argument("OptimConfig: invalid handoff thresholds");
  }
}

namespace {

// Minimizer of the cubic matching (a, fa, ga) and (b, fb, gb); midpoint when
// the interpolant degenerates (Nocedal & Wright, eq. 3.59).
double cubic_minimizer(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (!(disc >= 0.0)) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  double t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t)) t = 0.5 * (a + b);
  return std::clamp(t, lo + margin, hi - margin);
}

}  // namespace

LineSearchResult wolfe_search(const objectives::Objective& obj,
                              const objectives::Evaluation& start,
                              const Eigen::VectorXd& direction, const OptimConfig& cfg) {
  const double f0 = start.f;
  const double g0 = start.grad.dot(direction);
  if (!(g0 < 0.0)) {
    throw std::invalid_argument("wolfe_search: direction is not a descent direction");
  }
  const double c1 = cfg.wolfe_c1;
  const double c2 = cfg.wolfe_c2;

  LineSearchResult out;
  out.evaluations.push_back(start);
  std::vector<double> alphas{0.0};
  int best = 0;
  int calls = 0;

  const auto fval = [&](int i) { return out.evaluations[i].f; };
  const auto gval = [&](int i) { return out.evaluations[i].grad.dot(direction); };

  // Evaluates at alpha, halving on domain violations. Returns the index of
  // the recorded evaluation or -1 when the budget or the step underflows.
  const auto probe = [&](double alpha) -> int {
    while (calls < cfg.max_ls_evals && alpha > 1e-16) {
      ++calls;
      auto ev = obj(start.x + alpha * direction);
      if (ev) {
        out.evaluations.push_back(std::move(*ev));
        alphas.push_back(alpha);
        const int idx = static_cast<int>(out.evaluations.size()) - 1;
        if (fval(idx) < fval(best)) best = idx;
        return idx;
      }
      alpha *= 0.5;
    }
    return -1;
  };

  const auto finish = [&](int idx, LineSearchStatus status) {
    out.accepted_index = idx;
    out.accepted_step = alphas[idx];
    out.status = status;
    out.objective_calls = calls;
    return out;
  };
  const auto give_up = [&] {
    const LineSearchStatus status =
        calls >= cfg.max_ls_evals ? LineSearchStatus::kMaxEvals : LineSearchStatus::kDomainBlocked;
    return finish(fval(best) < f0 ? best : 0, status);
  };
  const auto wolfe_ok = [&](int i) {
    return fval(i) <= f0 + c1 * alphas[i] * g0 && std::abs(gval(i)) <= -c2 * g0;
  };

  // Zoom phase: cubic interpolation inside a bracket (N&W alg. 3.6).
  const auto zoom = [&](int lo, int hi) {
    for (;;) {
      if (std::abs(alphas[hi] - alphas[lo]) < 1e-14 * std::max(1.0, std::abs(alphas[lo]))) {
        return finish(lo, wolfe_ok(lo) ? LineSearchStatus::kConverged
                                       : LineSearchStatus::kMaxEvals);
      }
      const double at = cubic_minimizer(alphas[lo], fval(lo), gval(lo), alphas[hi], fval(hi),
                                        gval(hi));
      const int t = probe(at);
      if (t < 0) return give_up();
      if (fval(t) > f0 + c1 * alphas[t] * g0 || fval(t) >= fval(lo)) {
        hi = t;
        continue;
      }
      if (std::abs(gval(t)) <= -c2 * g0) {
        return finish(t, LineSearchStatus::kConverged);
      }
      if (gval(t) * (alphas[hi] - alphas[lo]) >= 0.0) hi = lo;
      lo = t;
    }
  };

  // Bracketing phase (N&W alg. 3.5).
  int prev = 0;
  double alpha = 1.0;
  for (int i = 0;; ++i) {
    const int cur = probe(alpha);
    if (cur < 0) return give_up();
    if (fval(cur) > f0 + c1 * alphas[cur] * g0 || (i > 0 && fval(cur) >= fval(prev))) {
      return zoom(prev, cur);
    }
    if (std::abs(gval(cur)) <= -c2 * g0) {
      return finish(cur, LineSearchStatus::kConverged);
    }
    if (gval(cur) >= 0.0) {
      return zoom(cur, prev);
    }
    prev = cur;
    alpha = std::min(2.0 * alphas[cur], 1e8);
  }
}

Optimizer::Optimizer(objectives::Objective obj, OptimConfig cfg)
    : obj_(std::move(obj)), cfg_(cfg), active_method_(cfg.method) {
  cfg_.validate();
}

void Optimizer::start(const Eigen::VectorXd& x0) {
  auto ev = obj_(x0);
  ++evals_;
  if (!ev) throw std::invalid_argument("optimize: start point is outside the domain");
  current_ = std::move(*ev);

  const int n = static_cast<int>(x0.size());
  active_method_ = cfg_.method;
  b_ = Eigen::MatrixXd::Identity(n, n);
  h_ = Eigen::MatrixXd::Identity(n, n);
  gp_.reset();
  if (cfg_.method == Method::kNpqn) {
    gp_.emplace(npmodel::GpState::identity_prior(n, npmodel::KernelHypers::isotropic(n, 1.0, 1.0)));
  }
  step_history_.clear();
  ratio_history_.clear();
  trace_ = OptimTrace{};
  iter_ = 0;
  evals_ = 1;
  handoff_done_ = false;
  force_steepest_ = false;
  finished_ = false;
  status_.clear();
  push_record(0.0, "");
}

Eigen::VectorXd Optimizer::compute_direction(std::string& events) {
  const Eigen::VectorXd& g = current_.grad;
  if (force_steepest_) {
    force_steepest_ = false;
    events += "steepest;";
    return -g;
  }
  Eigen::VectorXd d;
  switch (active_method_) {
    case Method::kBfgs:
      d = -(h_ * g);
      break;
    case Method::kNpqn: {
      try {
        auto res = gp_->search_direction(current_.x, g);
        if (res.steepest_fallback) events += "np-steepest;";
        else if (res.damped) events += "np-damped;";
        d = std::move(res.d);
      } catch (const npmodel::ConditioningError&) {
        events += "np-conditioning;";
        try {
          gp_->prune(current_.x, std::max(2, cfg_.mmax / 2));
          d = gp_->search_direction(current_.x, g).d;
        } catch (const npmodel::ConditioningError&) {
          d = -g;
        }
      }
      break;
    }
    default: {
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(b_);
      d = lu.solve(-g);
      if (!d.allFinite()) {
        d = -g;
        events += "solve-fallback;";
      }
    }
  }
  if (!(g.dot(d) < -1e-12 * g.norm() * d.norm())) {
    d = -g;
    events += "fallback-steepest;";
  }
  return d;
}

void Optimizer::apply_classic(const LineSearchResult& lsr, const classic::SecantPair& pair,
                              std::string& events) {
  (void)lsr;
  try {
    switch (active_method_) {
      case Method::kBroyden:
        b_ = classic::broyden_update(b_, pair);
        break;
      case Method::kSr1: {
        if (auto u = classic::sr1_update(b_, pair)) {
          b_ = std::move(*u);
        } else {
          events += "sr1-skip;";
        }
        break;
      }
      case Method::kPsb: {
        const classic::MatrixBelief belief{b_, Eigen::MatrixXd::Identity(b_.rows(), b_.cols())};
        b_ = classic::rank2_update(belief, pair).mean;
        break;
      }
      case Method::kDfp:
        b_ = classic::dfp_update(b_, pair);
        break;
      case Method::kBfgs:
        h_ = classic::bfgs_update_inverse(h_, pair);
        break;
      default:
        break;
    }
  } catch (const std::invalid_argument&) {
    events += "curvature-skip;";
  }
}

void Optimizer::apply_npqn(const LineSearchResult& lsr, const classic::SecantPair& pair,
                           std::string& events) {
  const bool warned_before = gp_->conditioning_warning();
  const Eigen::VectorXd& x_new = lsr.evaluations[lsr.accepted_index].x;
  for (std::size_t j = 1; j < lsr.evaluations.size(); ++j) {
    const auto& a = lsr.evaluations[j - 1];
    const auto& b = lsr.evaluations[j];
    if ((b.x - a.x).norm() <= 0.0) continue;
    try {
      gp_->add_observation(npmodel::LineObservation(a.x, b.x, b.grad - a.grad));
    } catch (const npmodel::ConditioningError&) {
      events += "np-conditioning;";
      try {
        gp_->prune(x_new, std::max(2, cfg_.mmax / 2));
        gp_->add_observation(npmodel::LineObservation(a.x, b.x, b.grad - a.grad));
      } catch (const npmodel::ConditioningError&) {
        // observation dropped
      }
    }
  }
  if (!warned_before && gp_->conditioning_warning()) events += "gram-warning;";
  gp_->prune(x_new, cfg_.mmax);
  if (pair.s.norm() > 0.0) {
    step_history_.push_back(pair.s.norm());
    ratio_history_.push_back(pair.y.norm() / pair.s.norm());
    if (!gp_->hypers_frozen() &&
        gp_->update_hypers(step_history_, ratio_history_)) {
      events += "hypers;";
    }
  }
}

void Optimizer::maybe_handoff(std::string& events) {
  if (cfg_.method != Method::kNpqn || active_method_ != Method::kNpqn || handoff_done_) return;
  bool trigger = false;
  if (iter_ >= cfg_.handoff_window) {
    const double fk = current_.f;
    const double fprev = trace_.records[iter_ - cfg_.handoff_window].f;
    if ((fprev - fk) / std::max(1.0, std::abs(fk)) < cfg_.handoff_rel_decrease) trigger = true;
  }
  if (!trigger && gp_->size() > 0 &&
      gp_->gram_condition_estimate() > cfg_.handoff_cond_limit) {
    trigger = true;
  }
  if (!trigger) return;

  const int n = static_cast<int>(current_.x.size());
  Eigen::MatrixXd hmat(n, n);
  bool dense_ok = n <= 200;
  if (dense_ok) {
    for (int i = 0; i < n && dense_ok; ++i) {
      const auto res = gp_->search_direction(current_.x, Eigen::VectorXd::Unit(n, i));
      if (res.steepest_fallback) {
        dense_ok = false;
        break;
      }
      hmat.col(i) = -res.d;  // column i of posterior_mean(x)^-1
    }
  }
  if (!dense_ok) {
    const Eigen::VectorXd diag = gp_->posterior_mean_diag(current_.x).cwiseMax(1e-8);
    hmat = diag.cwiseInverse().asDiagonal();
  }
  hmat = 0.5 * (hmat + hmat.transpose()).eval();
  const Eigen::LLT<Eigen::MatrixXd> llt(hmat);
  if (llt.info() != Eigen::Success) {
    const Eigen::VectorXd diag = hmat.diagonal().cwiseMax(1e-8);
    hmat = Eigen::MatrixXd(diag.asDiagonal());
  }
  h_ = hmat;
  active_method_ = Method::kBfgs;
  handoff_done_ = true;
  events += "handoff;";
}

void Optimizer::push_record(double step_len, const std::string& events) {
  TraceRecord rec;
  rec.iter = iter_;
  rec.x = current_.x;
  rec.f = current_.f;
  rec.grad_norm = current_.grad.norm();
  rec.step_len = step_len;
  rec.method = method_name(active_method_);
  rec.event = events;
  rec.cumulative_evals = evals_;
  trace_.records.push_back(std::move(rec));
}

bool Optimizer::iterate() {
  if (finished_) return false;
  if (current_.grad.norm() <= cfg_.grad_tol) {
    status_ = "converged";
    finished_ = true;
    return false;
  }
  if (iter_ >= cfg_.max_linesearches) {
    status_ = "max-linesearches";
    finished_ = true;
    return false;
  }

  std::string events;
  const Eigen::VectorXd d = compute_direction(events);
  const bool was_steepest = events.find("steepest") != std::string::npos;
  const Method step_method = active_method_;

  const objectives::Objective counted = [this](const Eigen::VectorXd& x) {
    ++evals_;
    return obj_(x);
  };
  LineSearchResult lsr = wolfe_search(counted, current_, d, cfg_);
  ++iter_;

  if (lsr.accepted_index == 0 || !(lsr.accepted_step > 0.0)) {
    events += "linesearch-stall;";
    if (was_steepest) {
      status_ = "linesearch-failure";
      finished_ = true;
      push_record(0.0, events);
      return false;
    }
    const auto n = current_.x.size();
    b_ = Eigen::MatrixXd::Identity(n, n);
    h_ = Eigen::MatrixXd::Identity(n, n);
    force_steepest_ = true;
    push_record(0.0, events);
    return true;
  }

  if (lsr.status == LineSearchStatus::kMaxEvals) events += "ls-maxevals;";
  if (lsr.status == LineSearchStatus::kDomainBlocked) events += "ls-domain;";

  const auto& accepted = lsr.evaluations[lsr.accepted_index];
  const classic::SecantPair pair{accepted.x - current_.x, accepted.grad - current_.grad};
  if (step_method == Method::kNpqn) {
    apply_npqn(lsr, pair, events);
  } else {
    apply_classic(lsr, pair, events);
  }
  const double step_len = pair.s.norm();
  current_ = accepted;
  maybe_handoff(events);

  // Record under the method that produced the step.
  const Method after = active_method_;
  active_method_ = step_method;
  push_record(step_len, events);
  active_method_ = after;
  return true;
}

OptimTrace Optimizer::finish() {
  if (status_.empty()) status_ = "max-linesearches";
  trace_.final_status = status_;
  trace_.converged = status_ == "converged";
  trace_.total_evaluations = evals_;
  trace_.linesearches = iter_;
  trace_.final_f = current_.f;
  trace_.final_grad_norm = current_.grad.norm();
  trace_.final_x = current_.x;
  return trace_;
}

OptimTrace Optimizer::optimize(const Eigen::VectorXd& x0) {
  start(x0);
  while (iterate()) {
  }
  return finish();
}

OptimTrace optimize(const objectives::Objective& obj, const Eigen::VectorXd& x0,
                    const OptimConfig& cfg) {
  Optimizer opt(obj, cfg);
  return opt.optimize(x0);
}

GammaInstance sample_gamma_problem(int dim, std::uint64_t seed) {
  if (dim < 1) throw std::invalid_argument("sample_gamma_problem: dim must be >= 1");
  detail::Rng rng(seed);
  objectives::GammaProblem problem = objectives::GammaProblem::sample(dim, rng, seed);
  Eigen::VectorXd x0(dim);
  for (int d = 0; d < dim; ++d) x0(d) = rng.uniform(0.5, 3.0);
  return GammaInstance{std::move(problem), std::move(x0)};
}

}  // namespace bqn::optimizer
