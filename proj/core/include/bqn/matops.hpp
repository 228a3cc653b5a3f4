#pragma once

#include <Eigen/Dense>

// Matrix-vector operator algebra shared by all belief updates: row-wise
// vectorization, Kronecker products, and the symmetrization (Gamma) /
// antisymmetrization (Delta) projections. The row-wise vec convention is
// fixed globally; every Kronecker identity used elsewhere assumes it.

namespace bqn::matops {

// Stacks X row-wise: element (i,j) lands at position i*cols + j.
Eigen::VectorXd vec(const Eigen::MatrixXd& x);

// Inverse of vec for a known shape.
Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols);

// Kronecker product, (A kron B)[(ij),(kl)] = A(i,k) * B(j,l) with row pairs
// enumerated row-major. Satisfies kron(X, Z^T) * vec(Y) = vec(X*Y*Z).
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Gamma X = (X + X^T)/2. Throws std::invalid_argument for non-square input.
Eigen::MatrixXd apply_sym(const Eigen::MatrixXd& x);

// Delta X = (X - X^T)/2. Throws std::invalid_argument for non-square input.
Eigen::MatrixXd apply_antisym(const Eigen::MatrixXd& x);

// Explicit n^2 x n^2 operator matrices acting on vec space. Only built for
// n <= 8 (used by the small-N exact-symmetry path); larger n throws.
Eigen::MatrixXd sym_operator(Eigen::Index n);
Eigen::MatrixXd antisym_operator(Eigen::Index n);

inline constexpr Eigen::Index kMaxOperatorDim = 8;

}  // namespace bqn::matops
