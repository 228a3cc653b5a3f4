#include "bqn/objectives.hpp"

#include <cmath>
#include <stdexcept>

#include "bqn/rng.hpp"
#include "bqn/specialfn.hpp"

namespace bqn::objectives {

Evaluation rosenbrock(const Eigen::Vector2d& x) {
  const double a = 1.0 - x(0);
  const double b = x(1) - x(0) * x(0);
  Evaluation out;
  out.x = x;
  out.f = a * a + 100.0 * b * b;
  out.grad = Eigen::Vector2d(-2.0 * a - 400.0 * x(0) * b, 200.0 * b);
  return out;
}

Objective make_rosenbrock() {
  return [](const Eigen::VectorXd& x) -> std::optional<Evaluation> {
    if (x.size() != 2 || !x.allFinite()) return std::nullopt;
    return rosenbrock(Eigen::Vector2d(x(0), x(1)));
  };
}

GammaProblem::GammaProblem(Eigen::VectorXd alphas, Eigen::VectorXd betas, std::uint64_t seed)
    : alphas_(std::move(alphas)), betas_(std::move(betas)), seed_(seed) {
  if (alphas_.size() != betas_.size() || alphas_.size() == 0) {
    throw std::invalid_argument("GammaProblem: parameter size mismatch");
  }
  if ((alphas_.array() <= 1.0).any()) {
    throw std::invalid_argument("GammaProblem: all alphas must exceed 1");
  }
  if ((betas_.array() <= 0.0).any()) {
    throw std::invalid_argument("GammaProblem: all betas must be positive");
  }
}

GammaProblem GammaProblem::sample(int dim, std::uint64_t seed) {
  detail::Rng rng(seed);
  return sample(dim, rng, seed);
}

GammaProblem GammaProblem::sample(int dim, detail::Rng& rng, std::uint64_t seed_label) {
  Eigen::VectorXd alphas(dim);
  Eigen::VectorXd betas(dim);
  for (int d = 0; d < dim; ++d) {
    alphas(d) = rng.uniform(1.5, 4.0);
    betas(d) = rng.uniform(0.5, 2.0);
  }
  return GammaProblem(std::move(alphas), std::move(betas), seed_label);
}

Eigen::VectorXd GammaProblem::minimizer() const {
  return ((alphas_.array() - 1.0) / betas_.array()).matrix();
}

double GammaProblem::min_value() const {
  const auto eval = gamma_objective(*this, minimizer());
  return eval->f;
}

std::optional<Evaluation> gamma_objective(const GammaProblem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.alphas().size()) {
    throw std::invalid_argument("gamma_objective: dimension mismatch");
  }
  if ((x.array() <= 0.0).any() || !x.allFinite()) {
    return std::nullopt;
  }
  const auto& alphas = p.alphas();
  const auto& betas = p.betas();
  double f = 0.0;
  Eigen::VectorXd grad(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double lg = specialfn::log_gamma(alphas(d));
    f -= (alphas(d) - 1.0) * std::log(x(d)) - betas(d) * x(d) +
         alphas(d) * std::log(betas(d)) - lg;
    grad(d) = betas(d) - (alphas(d) - 1.0) / x(d);
  }
  Evaluation out;
  out.x = x;
  out.f = f;
  out.grad = std::move(grad);
  return out;
}

Objective make_gamma(const GammaProblem& p) {
  return [p](const Eigen::VectorXd& x) { return gamma_objective(p, x); };
}

Evaluation quadratic(const Eigen::MatrixXd& bstar, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& x) {
  if (bstar.rows() != bstar.cols() || bstar.rows() != x.size() || x0.size() != x.size()) {
    throw std::invalid_argument("quadratic: dimension mismatch");
  }
  if (!bstar.isApprox(bstar.transpose(), 1e-12)) {
    throw std::invalid_argument("quadratic: Hessian must be symmetric");
  }
  const Eigen::VectorXd d = x - x0;
  Evaluation out;
  out.x = x;
  out.grad = bstar * d;
  out.f = 0.5 * d.dot(out.grad);
  return out;
}

Objective make_quadratic(Eigen::MatrixXd bstar, Eigen::VectorXd x0) {
  return [bstar = std::move(bstar), x0 = std::move(x0)](const Eigen::VectorXd& x)
             -> std::optional<Evaluation> {
    if (!x.allFinite()) return std::nullopt;
    return quadratic(bstar, x0, x);
  };
}

QuadraticProblem sample_quadratic_problem(int dim, std::uint64_t seed) {
  detail::Rng rng(seed);
  Eigen::VectorXd eigs(dim);
  for (int i = 0; i < dim; ++i) {
    const double frac = dim == 1 ? 0.0 : static_cast<double>(i) / (dim - 1);
    eigs(i) = std::pow(10.0, 2.0 * frac);  // log-spaced in [1, 100]
  }
  const Eigen::MatrixXd g = rng.normal_matrix(dim, dim);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd qmat = qr.householderQ();
  QuadraticProblem out;
  out.bstar = qmat * eigs.asDiagonal() * qmat.transpose();
  out.bstar = 0.5 * (out.bstar + out.bstar.transpose());
  out.center = rng.normal_vector(dim);
  out.start = out.center + 2.0 * rng.normal_vector(dim);
  return out;
}

std::optional<Eigen::MatrixXd> fd_hessian(const Objective& obj, const Eigen::VectorXd& x,
                                          double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    probe(j) = x(j) + h;
    const auto plus = obj(probe);
    probe(j) = x(j) - h;
    const auto minus = obj(probe);
    probe(j) = x(j);
    if (!plus || !minus) return std::nullopt;
    hess.col(j) = (plus->grad - minus->grad) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace bqn::objectives
