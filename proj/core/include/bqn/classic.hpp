#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

// Parametric quasi-Newton updates derived as Gaussian regression on the
// Hessian: rank-1 (Broyden, SR1), dual-observation rank-2 (PSB and its
// weighted generalization, DFP, BFGS), the batch rank-M posterior, the
// DFP/BFGS prior density, and a small-N exact-symmetry posterior.

namespace bqn::classic {

// One secant observation: step s = x_i - x_{i-1} and gradient difference
// y = grad f(x_i) - grad f(x_{i-1}).
struct SecantPair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
};

// Gaussian belief over a Hessian: mean B and Kronecker covariance factor V
// (full covariance V kron V). V must be symmetric positive semidefinite.
struct MatrixBelief {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd vfactor;
};

// Steps and gradient differences from several line searches, one column per
// observation.
struct BatchData {
  Eigen::MatrixXd s;
  Eigen::MatrixXd y;
};

// Posterior after the primal secant observation alone. The mean is a rank-1
// update satisfying B_i s = y; the covariance factor deflates along s.
// Throws std::invalid_argument when s^T V s is not safely positive.
MatrixBelief rank1_primal_update(const MatrixBelief& belief, const SecantPair& p);

// Unit-prior special case of the rank-1 update.
Eigen::MatrixXd broyden_update(const Eigen::MatrixXd& b, const SecantPair& p);

// Symmetric rank-1 update; returns nullopt (skip) when the curvature
// denominator |s^T r| <= 1e-8 ||s|| ||r||.
std::optional<Eigen::MatrixXd> sr1_update(const Eigen::MatrixXd& b, const SecantPair& p);

// Posterior after primal and dual observations: the general symmetric
// rank-2 update (PSB for V = I). Mean keeps symmetry of the prior mean and
// satisfies B_i s = y exactly.
MatrixBelief rank2_update(const MatrixBelief& belief, const SecantPair& p);

// DFP: the rank-2 mean with V s replaced by y. Requires y^T s > 0.
Eigen::MatrixXd dfp_update(const Eigen::MatrixXd& b, const SecantPair& p);

// BFGS on the inverse Hessian, the s <-> y, B <-> B^-1 exchange of DFP.
// Requires y^T s > 0; satisfies H_i y = s.
Eigen::MatrixXd bfgs_update_inverse(const Eigen::MatrixXd& h, const SecantPair& p);

// Batch posterior over M observations. Throws std::invalid_argument when
// S^T V0 S is numerically singular (e.g. repeated columns in S).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rank_m_update(const Eigen::MatrixXd& b0,
                                                          const Eigen::MatrixXd& v0,
                                                          const BatchData& data);

// Log of the V = B prior density (up to its unknown normalizer):
// -(N^2/2) log|det B| - (N - 2 tr(P) + tr(P^2))/2 with P = B_prev B^-1.
// |det| is taken so indefinite-but-invertible B remains evaluable.
// Throws std::domain_error for singular B.
double log_prior_density16(const Eigen::MatrixXd& b_prev, const Eigen::MatrixXd& b);

// Whether the rank-2 posterior mean stays positive definite, decided by a
// symmetric factorization of the updated mean.
bool is_posdef_after_update(const MatrixBelief& belief, const SecantPair& p);

// Exact Gaussian conditioning of vec(B) on the secant observation and the
// antisymmetry likelihood Delta vec(B) = 0, in the vanishing-noise limit.
// Dense over vec space, so restricted to N <= 8.
struct VecSpacePosterior {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd covariance;  // over vec(B), N^2 x N^2
};
VecSpacePosterior exact_symmetric_posterior(const MatrixBelief& belief, const SecantPair& p,
                                            double noise = 1e-14);

}  // namespace bqn::classic
