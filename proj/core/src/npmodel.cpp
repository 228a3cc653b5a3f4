#include "bqn/npmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "bqn/specialfn.hpp"

namespace bqn::npmodel {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("median of empty history");
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> tail(const std::vector<double>& v, std::size_t count) {
  const std::size_t n = std::min(count, v.size());
  return {v.end() - n, v.end()};
}

Eigen::MatrixXd chol_solve(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& rhs) {
  Eigen::MatrixXd z = lower.triangularView<Eigen::Lower>().solve(rhs);
  return lower.transpose().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace

KernelHypers KernelHypers::isotropic(int dim, double v, double lengthscale_sq) {
  KernelHypers h;
  h.vscale = v * Eigen::MatrixXd::Identity(dim, dim);
  h.lengthscale_sq = Eigen::VectorXd::Constant(dim, lengthscale_sq);
  return h;
}

double effective_kernel(const KernelHypers& h, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b) {
  const Eigen::ArrayXd d = (a - b).array();
  return std::exp(-(d * d / h.lengthscale_sq.array()).sum());
}

LineObservation::LineObservation(Eigen::VectorXd start_pt, Eigen::VectorXd end_pt,
                                 Eigen::VectorXd grad_diff)
    : start(std::move(start_pt)), finish(std::move(end_pt)), y(std::move(grad_diff)) {
  if (start.size() != finish.size() || start.size() != y.size()) {
    throw std::invalid_argument("LineObservation: dimension mismatch");
  }
  s = finish - start;
  if (!(s.norm() > 0.0)) {
    throw std::invalid_argument("LineObservation: zero-length step");
  }
}

GpState::GpState(int dim, KernelHypers hypers, Eigen::VectorXd prior_mean_diag, GpConfig cfg)
    : dim_(dim), hypers_(std::move(hypers)), b0_diag_(std::move(prior_mean_diag)), cfg_(cfg) {
  if (dim_ < 1) throw std::invalid_argument("GpState: dimension must be positive");
  if (hypers_.vscale.rows() != dim_ || hypers_.vscale.cols() != dim_ ||
      hypers_.lengthscale_sq.size() != dim_ || b0_diag_.size() != dim_) {
    throw std::invalid_argument("GpState: hyperparameter dimension mismatch");
  }
  if ((hypers_.lengthscale_sq.array() <= 0.0).any()) {
    throw std::invalid_argument("GpState: length scales must be positive");
  }
  if ((b0_diag_.array() <= 0.0).any()) {
    throw std::invalid_argument("GpState: prior mean diagonal must be positive");
  }
  s_.resize(dim_, 0);
  y_.resize(dim_, 0);
  resid_.resize(dim_, 0);
  vs_.resize(dim_, 0);
  gram_.resize(0, 0);
  sgram_.resize(0, 0);
  chol_.resize(0, 0);
  schol_.resize(0, 0);
}

GpState GpState::identity_prior(int dim, KernelHypers hypers, GpConfig cfg) {
  return GpState(dim, std::move(hypers), Eigen::VectorXd::Ones(dim), cfg);
}

Eigen::VectorXd GpState::weights() const {
  return (2.0 / hypers_.lengthscale_sq.array()).matrix();
}

double GpState::spatial_pair(const LineObservation& p, const LineObservation& q) const {
  const Eigen::ArrayXd w = weights().array();
  const Eigen::ArrayXd sp = p.s.array();
  const Eigen::ArrayXd sq = q.s.array();
  const Eigen::ArrayXd d0 = (p.start - q.start).array();
  Eigen::Matrix2d a;
  a(0, 0) = (w * sp * sp).sum();
  a(1, 1) = (w * sq * sq).sum();
  a(0, 1) = a(1, 0) = -(w * sp * sq).sum();
  const Eigen::Vector2d b(-(w * d0 * sp).sum(), (w * d0 * sq).sum());
  const double c = (w * d0 * d0).sum();
  return specialfn::se_double_integral_full(a, b, c);
}

double GpState::spatial_self(const LineObservation& p) const {
  const Eigen::ArrayXd w = weights().array();
  const Eigen::ArrayXd sp = p.s.array();
  return specialfn::se_double_integral_rank1((w * sp * sp).sum(), 0.0);
}

Eigen::VectorXd GpState::cross_spatial(const Eigen::VectorXd& x) const {
  const Eigen::ArrayXd w = weights().array();
  Eigen::VectorXd iota(size());
  for (int m = 0; m < size(); ++m) {
    const Eigen::ArrayXd sm = obs_[m].s.array();
    const Eigen::ArrayXd delta = (x - obs_[m].start).array();
    specialfn::SegmentQuadratic q;
    q.alpha = (w * sm * sm).sum();
    q.beta = (w * delta * sm).sum();
    q.gamma = (w * delta * delta).sum();
    iota(m) = specialfn::se_segment_integral(q);
  }
  return iota;
}

Eigen::MatrixXd GpState::cross_matrix(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd iota = cross_spatial(x);
  return vs_ * iota.asDiagonal();
}

Eigen::MatrixXd GpState::prior_projection() const {
  return b0_diag_.asDiagonal() * s_;
}

double GpState::gram_condition_estimate() const {
  if (size() == 0) return 1.0;
  const Eigen::VectorXd d = chol_.diagonal();
  const double ratio = d.maxCoeff() / d.minCoeff();
  return ratio * ratio;
}

Eigen::MatrixXd GpState::posterior_mean(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd mean = Eigen::MatrixXd(b0_diag_.asDiagonal());
  if (size() == 0) return mean;
  const Eigen::MatrixXd kx = cross_matrix(x);
  const Eigen::MatrixXd t1 = chol_solve(chol_, kx.transpose());  // K^-1 k^T, M x N
  const Eigen::MatrixXd rt1 = resid_ * t1;
  mean += rt1;
  if (dim_ == 1) {
    // Primal and dual observations coincide for a scalar Hessian; the model
    // reduces to exact scalar GP regression from interval integrals.
    return mean;
  }
  mean += rt1.transpose();
  if (cfg_.form == PosteriorForm::kThreeTerm) {
    const Eigen::MatrixXd g = resid_.transpose() * s_;
    mean -= t1.transpose() * g * t1;
  }
  return mean;
}

Eigen::VectorXd GpState::posterior_mean_diag(const Eigen::VectorXd& x) const {
  if (size() == 0) return b0_diag_;
  const Eigen::MatrixXd kx = cross_matrix(x);
  const Eigen::MatrixXd t1 = chol_solve(chol_, kx.transpose());
  Eigen::VectorXd diag = b0_diag_;
  diag += (resid_.array() * t1.transpose().array()).rowwise().sum().matrix();
  if (dim_ == 1) return diag;
  diag += (resid_.array() * t1.transpose().array()).rowwise().sum().matrix();
  if (cfg_.form == PosteriorForm::kThreeTerm) {
    const Eigen::MatrixXd g = resid_.transpose() * s_;
    const Eigen::MatrixXd gt1 = g * t1;
    diag -= (t1.array() * gt1.array()).colwise().sum().matrix().transpose();
  }
  return diag;
}

double GpState::posterior_cov_factor(const Eigen::VectorXd& x1,
                                     const Eigen::VectorXd& x2) const {
  const double prior = kernel(x1, x2);
  if (size() == 0) return prior;
  const Eigen::VectorXd i1 = cross_spatial(x1);
  const Eigen::VectorXd i2 = cross_spatial(x2);
  const Eigen::VectorXd w = chol_solve(schol_, i2);
  return prior - i1.dot(w);
}

GpState::Direction GpState::search_direction(const Eigen::VectorXd& x,
                                             const Eigen::VectorXd& grad) const {
  Direction out;
  const Eigen::ArrayXd d0 = b0_diag_.array();
  if (size() == 0) {
    out.d = -(grad.array() / d0).matrix();
    return out;
  }
  if (dim_ == 1) {
    const double b = posterior_mean(x)(0, 0);
    if (std::abs(b) < 1e-300 || !std::isfinite(b)) {
      out.d = -grad;
      out.steepest_fallback = true;
      return out;
    }
    out.d = -grad / b;
    return out;
  }

  const int m = size();
  Eigen::MatrixXd xmat(dim_, 2 * m);
  xmat.leftCols(m) = chol_solve(chol_, resid_.transpose()).transpose();  // U = R K^-1
  xmat.rightCols(m) = cross_matrix(x);                                   // W = k(x)

  Eigen::MatrixXd cinv = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  cinv.topRightCorner(m, m).setIdentity();
  cinv.bottomLeftCorner(m, m).setIdentity();
  if (cfg_.form == PosteriorForm::kThreeTerm) {
    const Eigen::MatrixXd g = resid_.transpose() * s_;
    const Eigen::MatrixXd kg = chol_solve(chol_, g);
    cinv.topLeftCorner(m, m) = chol_solve(chol_, kg.transpose()).transpose();  // K^-1 G K^-1
  }

  const Eigen::MatrixXd xd = (xmat.array().colwise() / d0).matrix();  // D^-1 X
  const Eigen::VectorXd dg = (grad.array() / d0).matrix();
  const Eigen::VectorXd rhs = xd.transpose() * grad;  // X^T D^-1 g
  Eigen::MatrixXd inner = cinv + xmat.transpose() * xd;

  const auto try_solve = [&](const Eigen::MatrixXd& mat) -> std::optional<Eigen::VectorXd> {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(mat);
    Eigen::VectorXd z = lu.solve(rhs);
    if (!z.allFinite()) return std::nullopt;
    const double res = (mat * z - rhs).norm();
    if (res > 1e-8 * (rhs.norm() + 1.0)) return std::nullopt;
    return z;
  };

  std::optional<Eigen::VectorXd> z = try_solve(inner);
  if (!z) {
    Eigen::MatrixXd damped = inner;
    damped.diagonal().array() += cfg_.inner_damping;
    z = try_solve(damped);
    out.damped = true;
  }
  if (!z) {
    out.d = -grad;
    out.steepest_fallback = true;
    return out;
  }
  out.d = -(dg - xd * *z);
  if (!out.d.allFinite()) {
    out.d = -grad;
    out.steepest_fallback = true;
  }
  return out;
}

void GpState::refactorize() {
  const int m = size();
  if (m == 0) {
    chol_.resize(0, 0);
    schol_.resize(0, 0);
    return;
  }
  const auto factor = [&](const Eigen::MatrixXd& g, double& jitter_out) -> Eigen::MatrixXd {
    double jitter = cfg_.jitter_scale * g.diagonal().mean();
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::MatrixXd work = g;
      work.diagonal().array() += jitter;
      const Eigen::LLT<Eigen::MatrixXd> llt(work);
      if (llt.info() == Eigen::Success) {
        jitter_out = jitter;
        return llt.matrixL();
      }
      conditioning_warning_ = true;
      jitter = std::max(jitter * 100.0, 1e-14 * std::max(g.diagonal().mean(), 1e-300));
    }
    throw ConditioningError("GpState: Gram factorization failed after jitter escalation");
  };
  chol_ = factor(gram_, jitter_);
  schol_ = factor(sgram_, sjitter_);
}

void GpState::rebuild_gram() {
  const int m = size();
  sgram_.resize(m, m);
  gram_.resize(m, m);
  vs_ = hypers_.vscale * s_;
  for (int p = 0; p < m; ++p) {
    sgram_(p, p) = spatial_self(obs_[p]);
    for (int q = p + 1; q < m; ++q) {
      sgram_(p, q) = sgram_(q, p) = spatial_pair(obs_[p], obs_[q]);
    }
  }
  for (int p = 0; p < m; ++p) {
    for (int q = 0; q < m; ++q) {
      gram_(p, q) = s_.col(p).dot(vs_.col(q)) * sgram_(p, q);
    }
  }
  gram_ = 0.5 * (gram_ + gram_.transpose()).eval();
  refactorize();
}

namespace {

// Appends [new_col; pivot] to a lower Cholesky factor; false on a pivot that
// is not safely positive.
bool extend_factor(Eigen::MatrixXd& lower, const Eigen::VectorXd& col, double diag,
                   bool& warn) {
  const int m = static_cast<int>(lower.rows());
  Eigen::VectorXd w(0);
  double pivot_sq = diag;
  if (m > 0) {
    w = lower.triangularView<Eigen::Lower>().solve(col);
    pivot_sq = diag - w.squaredNorm();
  }
  if (pivot_sq <= 1e-8 * std::abs(diag)) warn = true;
  if (pivot_sq <= 0.0) return false;
  lower.conservativeResize(m + 1, m + 1);
  lower.row(m).head(m) = w.transpose();
  lower.col(m).head(m).setZero();
  lower(m, m) = std::sqrt(pivot_sq);
  return true;
}

}  // namespace

void GpState::add_observation(const LineObservation& o) {
  if (o.start.size() != dim_) {
    throw std::invalid_argument("add_observation: dimension mismatch");
  }
  const int m = size();
  Eigen::VectorXd scol(m);
  for (int q = 0; q < m; ++q) scol(q) = spatial_pair(o, obs_[q]);
  const double sdiag = spatial_self(o);
  const Eigen::VectorXd vs_new = hypers_.vscale * o.s;
  Eigen::VectorXd kcol(m);
  for (int q = 0; q < m; ++q) kcol(q) = o.s.dot(vs_.col(q)) * scol(q);
  const double kdiag = o.s.dot(vs_new) * sdiag;

  obs_.push_back(o);
  s_.conservativeResize(dim_, m + 1);
  y_.conservativeResize(dim_, m + 1);
  resid_.conservativeResize(dim_, m + 1);
  vs_.conservativeResize(dim_, m + 1);
  s_.col(m) = o.s;
  y_.col(m) = o.y;
  resid_.col(m) = o.y - b0_diag_.asDiagonal() * o.s;
  vs_.col(m) = vs_new;

  sgram_.conservativeResize(m + 1, m + 1);
  gram_.conservativeResize(m + 1, m + 1);
  sgram_.row(m).head(m) = scol.transpose();
  sgram_.col(m).head(m) = scol;
  sgram_(m, m) = sdiag;
  gram_.row(m).head(m) = kcol.transpose();
  gram_.col(m).head(m) = kcol;
  gram_(m, m) = kdiag;

  if (m == 0) {
    refactorize();
    return;
  }
  bool ok = extend_factor(chol_, kcol, kdiag + jitter_, conditioning_warning_);
  ok = extend_factor(schol_, scol, sdiag + sjitter_, conditioning_warning_) && ok;
  if (!ok) {
    refactorize();  // throws ConditioningError if jitter escalation fails
  }
}

void GpState::remove_observation(int index) {
  const int m = size();
  if (index < 0 || index >= m) {
    throw std::invalid_argument("remove_observation: index out of range");
  }
  const auto drop = [index, m](Eigen::MatrixXd& mat, bool both) {
    Eigen::MatrixXd next(mat.rows() - (both ? 1 : 0), m - 1);
    int cj = 0;
    for (int j = 0; j < m; ++j) {
      if (j == index) continue;
      if (!both) {
        next.col(cj++) = mat.col(j);
        continue;
      }
      int ci = 0;
      for (int i = 0; i < m; ++i) {
        if (i == index) continue;
        next(ci++, cj) = mat(i, j);
      }
      ++cj;
    }
    mat = std::move(next);
  };
  obs_.erase(obs_.begin() + index);
  drop(s_, false);
  drop(y_, false);
  drop(resid_, false);
  drop(vs_, false);
  drop(sgram_, true);
  drop(gram_, true);
  if (index == m - 1 && m > 1) {
    // Truncating the factor restores the exact pre-append state.
    chol_ = chol_.topLeftCorner(m - 1, m - 1).eval();
    schol_ = schol_.topLeftCorner(m - 1, m - 1).eval();
    return;
  }
  refactorize();
}

void GpState::prune(const Eigen::VectorXd& x, int mmax) {
  if (mmax < 2) throw std::invalid_argument("prune: mmax must be at least 2");
  const int m = size();
  if (m <= mmax) return;
  const Eigen::VectorXd iota = cross_spatial(x);
  std::vector<std::pair<double, int>> scored(m);
  for (int i = 0; i < m; ++i) {
    const double score = iota(i) * vs_.col(i).norm() / std::sqrt(gram_(i, i) + jitter_);
    scored[i] = {score, i};
  }
  std::sort(scored.begin(), scored.end());  // ascending score, oldest first on ties
  std::vector<int> to_drop;
  for (int i = 0; i < m - mmax; ++i) to_drop.push_back(scored[i].second);
  std::sort(to_drop.rbegin(), to_drop.rend());
  for (int idx : to_drop) remove_observation(idx);
}

bool GpState::update_hypers(const std::vector<double>& recent_step_lengths,
                            const std::vector<double>& recent_curvature_ratios) {
  if (frozen_) return false;
  if (recent_step_lengths.empty() || recent_curvature_ratios.empty()) {
    throw std::invalid_argument("update_hypers: needs at least one completed line search");
  }
  const double med_step = median(tail(recent_step_lengths, 5));
  const double med_ratio = median(tail(recent_curvature_ratios, 5));
  const double lam = std::max(4.0 * med_step * med_step, 1e-16);
  const double v = std::max(med_ratio, 1e-12);

  const bool changed = std::abs(lam - hypers_.lengthscale_sq(0)) > 1e-12 * lam ||
                       std::abs(v - hypers_.vscale(0, 0)) > 1e-12 * v ||
                       !hypers_.vscale.isDiagonal(1e-300);
  ++hyper_updates_;
  if (hyper_updates_ >= 5) frozen_ = true;
  if (changed) {
    hypers_ = KernelHypers::isotropic(dim_, v, lam);
    rebuild_gram();
  }
  return changed;
}

void GpState::set_hypers(KernelHypers hypers) {
  if (hypers.vscale.rows() != dim_ || hypers.lengthscale_sq.size() != dim_) {
    throw std::invalid_argument("set_hypers: dimension mismatch");
  }
  if ((hypers.lengthscale_sq.array() <= 0.0).any()) {
    throw std::invalid_argument("set_hypers: length scales must be positive");
  }
  hypers_ = std::move(hypers);
  if (size() > 0) rebuild_gram();
}

}  // namespace bqn::npmodel
