#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

// Nonparametric Bayesian quasi-Newton model: a squared-exponential prior
// over Hessian functions observed through line integrals along line-search
// paths. The Gram matrix is built from the analytic kernel integrals in
// specialfn; the posterior supports low-rank (Woodbury) search directions
// that never form an N x N matrix.

namespace bqn::npmodel {

// V (output scale, symmetric PSD) and the diagonal of Lambda, the length
// scales of the single joint squared-exponential kernel. Entries of
// lengthscale_sq carry squared problem units. The effective spatial factor
// kappa(a,b) = exp(-(a-b)^T Lambda^-1 (a-b)) carries metric Lambda/2
// because the matrix-variate covariance multiplies two kernel factors.
struct KernelHypers {
  Eigen::MatrixXd vscale;
  Eigen::VectorXd lengthscale_sq;

  static KernelHypers isotropic(int dim, double v, double lengthscale_sq);
};

double effective_kernel(const KernelHypers& h, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b);

// One line-integral observation: the gradient difference y equals the path
// integral of the Hessian along the segment from start to finish times s.
struct LineObservation {
  Eigen::VectorXd start;
  Eigen::VectorXd finish;
  Eigen::VectorXd s;  // finish - start, nonzero
  Eigen::VectorXd y;

  LineObservation(Eigen::VectorXd start_pt, Eigen::VectorXd end_pt, Eigen::VectorXd grad_diff);
};

// Posterior mean assembly. The three-term form mirrors the batch parametric
// posterior (primal cross term, dual cross term, subtractive correction with
// G = R^T S); the two-term form drops the correction and is kept for
// comparison.
enum class PosteriorForm { kThreeTerm, kTwoTerm };

struct GpConfig {
  PosteriorForm form = PosteriorForm::kThreeTerm;
  double jitter_scale = 1e-10;    // jitter = jitter_scale * mean Gram diagonal
  double inner_damping = 1e-8;    // added to the Woodbury inner system on retry
};

class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GpState {
 public:
  GpState(int dim, KernelHypers hypers, Eigen::VectorXd prior_mean_diag, GpConfig cfg = {});

  // Constant prior mean B0 = I, the default from the reference setup.
  static GpState identity_prior(int dim, KernelHypers hypers, GpConfig cfg = {});

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(obs_.size()); }
  const std::vector<LineObservation>& observations() const { return obs_; }
  const KernelHypers& hypers() const { return hypers_; }
  const Eigen::VectorXd& prior_mean_diag() const { return b0_diag_; }
  const GpConfig& config() const { return cfg_; }

  const Eigen::MatrixXd& gram() const { return gram_; }          // K, M x M
  const Eigen::MatrixXd& spatial_gram() const { return sgram_; } // path-pair integrals
  double gram_jitter() const { return jitter_; }
  double gram_condition_estimate() const;
  bool conditioning_warning() const { return conditioning_warning_; }

  double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return effective_kernel(hypers_, a, b);
  }

  // iota_m(x) = int_0^1 kappa(x, r^m(t)) dt, one entry per observation.
  Eigen::VectorXd cross_spatial(const Eigen::VectorXd& x) const;

  // frak-k(x): column m is (V s_m) iota_m(x).
  Eigen::MatrixXd cross_matrix(const Eigen::VectorXd& x) const;

  // B0 S: the prior's prediction for each observation column.
  Eigen::MatrixXd prior_projection() const;

  Eigen::MatrixXd posterior_mean(const Eigen::VectorXd& x) const;
  Eigen::VectorXd posterior_mean_diag(const Eigen::VectorXd& x) const;

  // Scalar spatial factor of the posterior covariance: kappa(x1,x2) deflated
  // by the observed path integrals. Exact for N = 1; callers form variances
  // as (V kron V)-weighted squares.
  double posterior_cov_factor(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) const;

  struct Direction {
    Eigen::VectorXd d;
    bool damped = false;
    bool steepest_fallback = false;
  };

  // d = -posterior_mean(x)^-1 grad via the matrix inversion lemma with a
  // 2M x 2M inner solve; cost O(N M^2 + M^3), linear in N at fixed M.
  // Requires a positive diagonal prior mean.
  Direction search_direction(const Eigen::VectorXd& x, const Eigen::VectorXd& grad) const;

  void add_observation(const LineObservation& o);
  void remove_observation(int index);

  // Drops lowest-influence observations until size() <= mmax; influence is
  // iota_m(x) ||V s_m|| / sqrt(K_mm), ties resolved oldest-first.
  void prune(const Eigen::VectorXd& x, int mmax);

  // Ad hoc hyperparameter tracking: Lambda = (2 median step length)^2 I and
  // V = median(||y||/||s||) I over the most recent (up to 5) line searches.
  // Freezes permanently after the fifth call; returns whether hypers changed.
  bool update_hypers(const std::vector<double>& recent_step_lengths,
                     const std::vector<double>& recent_curvature_ratios);
  bool hypers_frozen() const { return frozen_; }

  // Direct configuration (demos, tests); triggers a full Gram rebuild.
  void set_hypers(KernelHypers hypers);

 private:
  void rebuild_gram();
  void refactorize();
  void append_gram_entries(const LineObservation& o);
  Eigen::VectorXd weights() const;  // 2 / lengthscale_sq, the kappa metric

  double spatial_pair(const LineObservation& p, const LineObservation& q) const;
  double spatial_self(const LineObservation& p) const;

  int dim_ = 0;
  KernelHypers hypers_;
  Eigen::VectorXd b0_diag_;
  GpConfig cfg_;

  std::vector<LineObservation> obs_;
  Eigen::MatrixXd s_;      // N x M steps
  Eigen::MatrixXd y_;      // N x M gradient differences
  Eigen::MatrixXd resid_;  // Y - B0 S
  Eigen::MatrixXd vs_;     // V S

  Eigen::MatrixXd gram_;    // (s_p^T V s_q) * J_pq
  Eigen::MatrixXd sgram_;   // J_pq
  Eigen::MatrixXd chol_;    // lower factor of gram + jitter I
  Eigen::MatrixXd schol_;   // lower factor of sgram + sjitter I
  double jitter_ = 0.0;
  double sjitter_ = 0.0;

  bool conditioning_warning_ = false;
  bool frozen_ = false;
  int hyper_updates_ = 0;
};

}  // namespace bqn::npmodel
