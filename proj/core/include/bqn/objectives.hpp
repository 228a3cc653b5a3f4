#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>

// Objective-function contract and the benchmark problems: Rosenbrock's
// polynomial, negative log products of Gamma densities, and quadratics.
// Objectives return nullopt outside their domain; line searches treat that
// as an infeasible step and backtrack.

namespace bqn::detail {
class Rng;
}

namespace bqn::objectives {

struct Evaluation {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
};

using Objective = std::function<std::optional<Evaluation>(const Eigen::VectorXd&)>;

// f(x,y) = (1-x)^2 + 100 (y - x^2)^2, minimum at (1,1).
Evaluation rosenbrock(const Eigen::Vector2d& x);
Objective make_rosenbrock();

// Negative log density of a product of independent Gamma distributions.
// Requires all alphas > 1 (interior mode) and betas > 0.
class GammaProblem {
 public:
  GammaProblem(Eigen::VectorXd alphas, Eigen::VectorXd betas, std::uint64_t seed);

  // alpha_d ~ U[1.5, 4], beta_d ~ U[0.5, 2], deterministic in the seed.
  static GammaProblem sample(int dim, std::uint64_t seed);

  // Same draw from an existing stream, so callers can continue drawing
  // (e.g. a shared start point) from the same seed.
  static GammaProblem sample(int dim, detail::Rng& rng, std::uint64_t seed_label);

  const Eigen::VectorXd& alphas() const { return alphas_; }
  const Eigen::VectorXd& betas() const { return betas_; }
  std::uint64_t seed() const { return seed_; }
  int dim() const { return static_cast<int>(alphas_.size()); }

  // Mode of the density, x_d = (alpha_d - 1) / beta_d.
  Eigen::VectorXd minimizer() const;
  double min_value() const;

 private:
  Eigen::VectorXd alphas_;
  Eigen::VectorXd betas_;
  std::uint64_t seed_ = 0;
};

// nullopt when any x_d <= 0.
std::optional<Evaluation> gamma_objective(const GammaProblem& p, const Eigen::VectorXd& x);
Objective make_gamma(const GammaProblem& p);

// f = (x - x0)^T B* (x - x0) / 2 with B* symmetric positive definite.
// Throws std::invalid_argument for asymmetric B*.
Evaluation quadratic(const Eigen::MatrixXd& bstar, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& x);
Objective make_quadratic(Eigen::MatrixXd bstar, Eigen::VectorXd x0);

// Deterministic SPD quadratic test problem: eigenvalues log-spaced in
// [1, 100] under a random rotation, plus center and start point.
struct QuadraticProblem {
  Eigen::MatrixXd bstar;
  Eigen::VectorXd center;
  Eigen::VectorXd start;
};
QuadraticProblem sample_quadratic_problem(int dim, std::uint64_t seed);

// Central finite difference of the gradient, symmetrized. Propagates
// domain violations as nullopt.
std::optional<Eigen::MatrixXd> fd_hessian(const Objective& obj, const Eigen::VectorXd& x,
                                          double h);

}  // namespace bqn::objectives
