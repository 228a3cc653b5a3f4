#include "bqn/classic.hpp"

#include <cmath>
#include <stdexcept>

#include "bqn/matops.hpp"

namespace bqn::classic {

namespace {

constexpr double kSingularTol = 1e-14;

void check_pair(const MatrixBelief& belief, const SecantPair& p) {
  const auto n = belief.mean.rows();
  if (belief.mean.cols() != n || belief.vfactor.rows() != n || belief.vfactor.cols() != n ||
      p.s.size() != n || p.y.size() != n) {
    throw std::invalid_argument("belief/secant dimension mismatch");
  }
}

}  // namespace

MatrixBelief rank1_primal_update(const MatrixBelief& belief, const SecantPair& p) {
  check_pair(belief, p);
  const Eigen::VectorXd vs = belief.vfactor * p.s;
  const double svs = p.s.dot(vs);
  if (!(svs > kSingularTol * p.s.squaredNorm() * belief.vfactor.norm() + kSingularTol)) {
    throw std::invalid_argument("rank1_primal_update: prior covariance singular along s");
  }
  const Eigen::VectorXd r = p.y - belief.mean * p.s;
  MatrixBelief out;
  out.mean = belief.mean + r * vs.transpose() / svs;
  out.vfactor = belief.vfactor - vs * vs.transpose() / svs;
  return out;
}

Eigen::MatrixXd broyden_update(const Eigen::MatrixXd& b, const SecantPair& p) {
  const double ss = p.s.squaredNorm();
  if (!(ss > 0.0)) {
    throw std::invalid_argument("broyden_update: zero step");
  }
  return b + (p.y - b * p.s) * p.s.transpose() / ss;
}

std::optional<Eigen::MatrixXd> sr1_update(const Eigen::MatrixXd& b, const SecantPair& p) {
  if (!(p.s.squaredNorm() > 0.0)) {
    throw std::invalid_argument("sr1_update: zero step");
  }
  const Eigen::VectorXd r = p.y - b * p.s;
  const double sr = p.s.dot(r);
  if (std::abs(sr) <= 1e-8 * p.s.norm() * r.norm()) {
    return std::nullopt;
  }
  return b + r * r.transpose() / sr;
}

MatrixBelief rank2_update(const MatrixBelief& belief, const SecantPair& p) {
  check_pair(belief, p);
  const Eigen::VectorXd vs = belief.vfactor * p.s;
  const double svs = p.s.dot(vs);
  if (!(svs > kSingularTol * p.s.squaredNorm() * belief.vfactor.norm() + kSingularTol)) {
    throw std::invalid_argument("rank2_update: prior covariance singular along s");
  }
  const Eigen::VectorXd r = p.y - belief.mean * p.s;
  const double sr = p.s.dot(r);
  MatrixBelief out;
  out.mean = belief.mean + (r * vs.transpose() + vs * r.transpose()) / svs -
             sr * (vs * vs.transpose()) / (svs * svs);
  out.vfactor = belief.vfactor - vs * vs.transpose() / svs;
  return out;
}

Eigen::MatrixXd dfp_update(const Eigen::MatrixXd& b, const SecantPair& p) {
  const double ys = p.y.dot(p.s);
  if (!(ys > kSingularTol * p.y.norm() * p.s.norm())) {
    throw std::invalid_argument("dfp_update: curvature condition y^T s > 0 violated");
  }
  const Eigen::VectorXd r = p.y - b * p.s;
  const double sr = p.s.dot(r);
  return b + (r * p.y.transpose() + p.y * r.transpose()) / ys -
         sr * (p.y * p.y.transpose()) / (ys * ys);
}

Eigen::MatrixXd bfgs_update_inverse(const Eigen::MatrixXd& h, const SecantPair& p) {
  const double ys = p.y.dot(p.s);
  if (!(ys > kSingularTol * p.y.norm() * p.s.norm())) {
    throw std::invalid_argument("bfgs_update_inverse: curvature condition violated");
  }
  const Eigen::VectorXd hy = h * p.y;
  const double yhy = p.y.dot(hy);
  // (I - s y^T/ys) H (I - y s^T/ys) + s s^T/ys, expanded.
  return h - (hy * p.s.transpose() + p.s * hy.transpose()) / ys +
         (1.0 + yhy / ys) * (p.s * p.s.transpose()) / ys;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rank_m_update(const Eigen::MatrixXd& b0,
                                                          const Eigen::MatrixXd& v0,
                                                          const BatchData& data) {
  const auto n = b0.rows();
  const auto m = data.s.cols();
  if (data.s.rows() != n || data.y.rows() != n || data.y.cols() != m) {
    throw std::invalid_argument("rank_m_update: dimension mismatch");
  }
  const Eigen::MatrixXd vs = v0 * data.s;          // N x M
  const Eigen::MatrixXd gram = data.s.transpose() * vs;  // S^T V0 S
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(1e-10);
  if (lu.rank() < m) {
    throw std::invalid_argument("rank_m_update: S^T V0 S is singular (rank-deficient S)");
  }
  const Eigen::MatrixXd resid = data.y - b0 * data.s;   // N x M
  const Eigen::MatrixXd giv_sv = lu.solve(vs.transpose());          // G^-1 S^T V0
  const Eigen::MatrixXd cross = data.s.transpose() * resid;          // S^T (Y - B0 S)
  Eigen::MatrixXd mean = b0 + resid * giv_sv + giv_sv.transpose() * resid.transpose() -
                         giv_sv.transpose() * cross * giv_sv;
  Eigen::MatrixXd vpost = v0 - vs * giv_sv;
  return {std::move(mean), std::move(vpost)};
}

double log_prior_density16(const Eigen::MatrixXd& b_prev, const Eigen::MatrixXd& b) {
  const auto n = b.rows();
  if (b.cols() != n || b_prev.rows() != n || b_prev.cols() != n) {
    throw std::invalid_argument("log_prior_density16: dimension mismatch");
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
  if (!lu.isInvertible()) {
    throw std::domain_error("log_prior_density16: not well-defined for degenerate matrices");
  }
  const double logabsdet = std::log(std::abs(lu.determinant()));
  const Eigen::MatrixXd p = b_prev * lu.inverse();
  const double exponent =
      -0.5 * (static_cast<double>(n) - 2.0 * p.trace() + (p * p).trace());
  return -0.5 * static_cast<double>(n * n) * logabsdet + exponent;
}

bool is_posdef_after_update(const MatrixBelief& belief, const SecantPair& p) {
  const MatrixBelief post = rank2_update(belief, p);
  const Eigen::MatrixXd sym = matops::apply_sym(post.mean);
  const Eigen::LLT<Eigen::MatrixXd> llt(sym);
  return llt.info() == Eigen::Success;
}

VecSpacePosterior exact_symmetric_posterior(const MatrixBelief& belief, const SecantPair& p,
                                            double noise) {
  check_pair(belief, p);
  const Eigen::Index n = belief.mean.rows();
  if (n > matops::kMaxOperatorDim) {
    throw std::invalid_argument("exact_symmetric_posterior: dense conditioning needs N <= 8");
  }
  const Eigen::Index n2 = n * n;

  // Observation operator rows: A1 vec(B) = B s (secant), Delta vec(B) = 0.
  Eigen::MatrixXd a(n + n2, n2);
  a.topRows(n) = matops::kron(Eigen::MatrixXd::Identity(n, n), p.s.transpose());
  a.bottomRows(n2) = matops::antisym_operator(n);

  Eigen::VectorXd obs(n + n2);
  obs.head(n) = p.y;
  obs.tail(n2).setZero();

  const Eigen::MatrixXd sigma = matops::kron(belief.vfactor, belief.vfactor);
  const Eigen::VectorXd mu = matops::vec(belief.mean);

  const Eigen::MatrixXd sa = sigma * a.transpose();
  Eigen::MatrixXd gram = a * sa;
  gram.diagonal().array() += noise;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("exact_symmetric_posterior: conditioning failed");
  }

  const Eigen::VectorXd innov = obs - a * mu;
  VecSpacePosterior out;
  out.mean = matops::unvec(mu + sa * ldlt.solve(innov), n, n);
  out.covariance = sigma - sa * ldlt.solve(sa.transpose());
  return out;
}

}  // namespace bqn::classic
