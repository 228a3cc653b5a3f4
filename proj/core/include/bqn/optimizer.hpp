#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bqn/classic.hpp"
#include "bqn/npmodel.hpp"
#include "bqn/objectives.hpp"

// Line-search driver over the six update rules. Classic methods consume only
// the endpoint secant pair of each line search; the nonparametric method
// consumes every consecutive pair of evaluations, prunes its observation set,
// tracks hyperparameters, and hands off to BFGS near convergence.

namespace bqn::optimizer {

enum class Method { kBroyden, kSr1, kPsb, kDfp, kBfgs, kNpqn };

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct OptimConfig {
  Method method = Method::kBfgs;
  double grad_tol = 1e-6;
  int max_linesearches = 200;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_ls_evals = 20;
  int mmax = 50;
  double handoff_rel_decrease = 1e-6;  // over handoff_window consecutive searches
  int handoff_window = 3;
  double handoff_cond_limit = 1e12;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

enum class LineSearchStatus { kConverged, kMaxEvals, kDomainBlocked };

struct LineSearchResult {
  double accepted_step = 0.0;
  int accepted_index = 0;  // into evaluations
  std::vector<objectives::Evaluation> evaluations;  // start first, then trials in call order
  LineSearchStatus status = LineSearchStatus::kConverged;
  int objective_calls = 0;  // including infeasible probes
};

// Strong Wolfe line search (bracketing plus cubic-interpolation zoom).
// Returns every feasible evaluation made. Throws std::invalid_argument for a
// non-descent direction; domain violations halve the trial step.
LineSearchResult wolfe_search(const objectives::Objective& obj,
                              const objectives::Evaluation& start,
                              const Eigen::VectorXd& direction, const OptimConfig& cfg);

struct TraceRecord {
  int iter = 0;
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  double step_len = 0.0;
  std::string method;
  std::string event;
  int cumulative_evals = 0;
};

struct OptimTrace {
  std::vector<TraceRecord> records;
  std::string final_status;  // converged | max-linesearches | linesearch-failure
  bool converged = false;
  int total_evaluations = 0;
  int linesearches = 0;
  double final_f = 0.0;
  double final_grad_norm = 0.0;
  Eigen::VectorXd final_x;
};

class Optimizer {
 public:
  Optimizer(objectives::Objective obj, OptimConfig cfg);

  OptimTrace optimize(const Eigen::VectorXd& x0);

  // Single-iteration drive, exposed so scenario tests can inspect state.
  void start(const Eigen::VectorXd& x0);
  bool iterate();  // one line search; false when finished
  OptimTrace finish();

  const objectives::Evaluation& current() const { return current_; }
  Method active_method() const { return active_method_; }
  bool handoff_happened() const { return handoff_done_; }
  const npmodel::GpState* gp_state() const { return gp_ ? &*gp_ : nullptr; }
  const Eigen::MatrixXd& hessian_estimate() const { return b_; }
  const Eigen::MatrixXd& inverse_hessian_estimate() const { return h_; }
  const OptimTrace& trace() const { return trace_; }

 private:
  Eigen::VectorXd compute_direction(std::string& events);
  void apply_classic(const LineSearchResult& lsr, const classic::SecantPair& pair,
                     std::string& events);
  void apply_npqn(const LineSearchResult& lsr, const classic::SecantPair& pair,
                  std::string& events);
  void maybe_handoff(std::string& events);
  void push_record(double step_len, const std::string& events);

  objectives::Objective obj_;
  OptimConfig cfg_;
  Method active_method_;
  objectives::Evaluation current_;
  Eigen::MatrixXd b_;  // direct Hessian estimate (broyden/sr1/psb/dfp)
  Eigen::MatrixXd h_;  // inverse estimate (bfgs)
  std::optional<npmodel::GpState> gp_;
  std::vector<double> step_history_;
  std::vector<double> ratio_history_;
  OptimTrace trace_;
  int evals_ = 0;
  int iter_ = 0;
  bool handoff_done_ = false;
  bool force_steepest_ = false;
  bool finished_ = false;
  std::string status_;
};

OptimTrace optimize(const objectives::Objective& obj, const Eigen::VectorXd& x0,
                    const OptimConfig& cfg);

// Deterministic Gamma benchmark instance: problem parameters and the start
// point shared by all methods, both drawn from one seeded stream.
struct GammaInstance {
  objectives::GammaProblem problem;
  Eigen::VectorXd x0;
};
GammaInstance sample_gamma_problem(int dim, std::uint64_t seed);

}  // namespace bqn::optimizer
