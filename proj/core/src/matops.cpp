#include "bqn/matops.hpp"

#include <stdexcept>

namespace bqn::matops {

Eigen::VectorXd vec(const Eigen::MatrixXd& x) {
  // Eigen stores column-major; row-wise stacking is vec of the transpose.
  Eigen::MatrixXd xt = x.transpose();
  return Eigen::Map<const Eigen::VectorXd>(xt.data(), xt.size());
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw std::invalid_argument("unvec: size mismatch");
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    out.row(i) = v.segment(i * cols, cols).transpose();
  }
  return out;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      out.block(i * b.rows(), k * b.cols(), b.rows(), b.cols()) = a(i, k) * b;
    }
  }
  return out;
}

Eigen::MatrixXd apply_sym(const Eigen::MatrixXd& x) {
  if (x.rows() != x.cols()) {
    throw std::invalid_argument("apply_sym: matrix must be square");
  }
  return 0.5 * (x + x.transpose());
}

Eigen::MatrixXd apply_antisym(const Eigen::MatrixXd& x) {
  if (x.rows() != x.cols()) {
    throw std::invalid_argument("apply_antisym: matrix must be square");
  }
  return 0.5 * (x - x.transpose());
}

namespace {

Eigen::MatrixXd projection_operator(Eigen::Index n, double transpose_sign) {
  if (n < 1 || n > kMaxOperatorDim) {
    throw std::invalid_argument("operator matrices are only built for n in [1,8]");
  }
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index row = i * n + j;
      op(row, i * n + j) += 0.5;
      op(row, j * n + i) += 0.5 * transpose_sign;
    }
  }
  return op;
}

}  // namespace

Eigen::MatrixXd sym_operator(Eigen::Index n) { return projection_operator(n, 1.0); }

Eigen::MatrixXd antisym_operator(Eigen::Index n) { return projection_operator(n, -1.0); }

}  // namespace bqn::matops
