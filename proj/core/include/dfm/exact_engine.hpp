#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "dfm/coupling.hpp"
#include "dfm/kernels.hpp"
#include "dfm/lattice.hpp"

namespace dfm {

/// A probability vector over the lattice at a given time.  Construction
/// validates nonnegativity and renormalizes (total must already be within
/// 1e-6 of 1).
struct MarginalDist {
  double t = 0.0;
  Eigen::VectorXd probs;

  MarginalDist() = default;
  MarginalDist(double time, Eigen::VectorXd p);
};

/// Exact interpolant marginals, bridge and projected scores, and the
/// projected generator, all computed from dense kernel algebra:
///
///   N_t(x, y) = sum_{x0,x1} p_{t|0}(x|x0) pi~(x0,x1) p_{1|t}(x1|y)
///
/// so that p_t^I(x) = N_t(x, x) and u_t^M(x, y) = N_t(x, y) / N_t(x, x).
/// N_t tables are memoized per exact time; completed tables are immutable and
/// safe to share across threads.
class ScoreEngine {
 public:
  /// Global floor on distance to the terminal time: scores are only served
  /// for t <= 1 - kEtaMin (the score diverges at t = 1).
  static constexpr double kEtaMin = 1e-3;

  explicit ScoreEngine(ReweightedCoupling rc);

  const Dynamics& dynamics() const { return rc_.dynamics(); }
  const LatticeSpec& spec() const { return rc_.spec(); }
  const ReweightedCoupling& coupling() const { return rc_; }
  const JumpTable& jumps() const { return jumps_; }

  /// p_t^I for t in [0, 1].
  MarginalDist marginal(double t) const;

  /// Unnormalized two-sided table N_t (diagonal = unnormalized marginal).
  std::shared_ptr<const Eigen::MatrixXd> numerators(double t) const;

  /// Joint law J(x, x1) = P(X_t^I = x, X_1^I = x1).
  Eigen::MatrixXd joint_with_endpoint(double t) const;

  /// Projected score u_t^M(x, y) for any target y; t in [0, 1 - kEtaMin].
  /// Throws UndefinedScoreError when p_t^I(x) = 0.
  double score(double t, StateIndex x, StateIndex y) const;
  double score(double t, StateIndex x, const JumpOp& op) const;

  /// Bridge score u_t^{(x1)}(x, y) = p_{1|t}(x1|y) / p_{1|t}(x1|x).
  double bridge_score(double t, StateIndex x1, StateIndex x, StateIndex y) const;

  /// q_t^M: off-diagonal q(x,y) u_t^M(x,y), diagonal = -row sum.  Rows of
  /// zero-mass states are zero (they never carry probability flow).
  Eigen::MatrixXd projected_generator(double t) const;

  /// | d/dt u_t^M(x, sigma(x)) - lambda(m) sum_sigma' A_t |, central
  /// difference step 1e-5.  Requires t in [0.05, 1 - kEtaMin].
  double score_ode_residual(double t, StateIndex x, const JumpOp& op) const;

  /// Residuals of the score-mean and score-entropy evolution identities over
  /// [s, t], with 21-node composite Simpson quadrature and exact
  /// expectations.  Returns (mean residual, entropy residual).
  std::pair<double, double> evolution_residuals(double s, double t, const JumpOp& op) const;

 private:
  void require_score_time(double t) const;

  ReweightedCoupling rc_;
  KernelCache kernels_;
  JumpTable jumps_;
  StateIndex states_;

  mutable std::mutex mutex_;
  mutable std::map<std::int64_t, std::shared_ptr<const Eigen::MatrixXd>> numerators_cache_;
};

/// Classical fourth-order time stepping of dp/dt (x) = sum_z p(z) q_t(z, x),
/// with step min(1e-3, (1-t)/50) and per-step renormalization.
MarginalDist forward_evolve(const MarginalDist& p0,
                            const std::function<Eigen::MatrixXd(double)>& generator, double t0,
                            double t1);

/// phi(a) = a log a - a + 1, the score-entropy integrand.
inline double entropy_phi(double a) { return a > 0.0 ? a * std::log(a) - a + 1.0 : 1.0; }

}  // namespace dfm
