#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dfm/config.hpp"
#include "dfm/exact_engine.hpp"
#include "dfm/losses.hpp"
#include "dfm/metrics.hpp"
#include "dfm/sampler.hpp"

namespace dfm {

/// One named verification check.  `pass` is decided by the check itself
/// (most are "measured <= bound"; a few assert a strict excess).
struct CheckResult {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
};

/// Explicit Lemma-1 constants: pointwise score bounds on [0, 1 - eta].
double score_lower_bound(DynamicsKind kind, int m, double t);
double score_upper_bound(DynamicsKind kind, int m, double t);
/// Explicit bound on sum_sigma u_t^M(x, sigma(x)).
double score_sum_bound(DynamicsKind kind, int m, int d, double t);
/// Explicit early-stopping bound on TV(mu_{1-eta}, mu_1).
double early_stopping_tv_bound(DynamicsKind kind, int m, int d, double eta);

/// A fully assembled experiment.
struct Instance {
  Dynamics dyn;
  TimeGrid grid;
  std::shared_ptr<const ScoreEngine> engine;
  std::shared_ptr<const ScoreModel> model;
};

Instance build_instance(const ExperimentConfig& cfg);

namespace checks {

CheckResult kernel_normalization(const Dynamics& dyn, int samples, std::uint64_t seed);
CheckResult kernel_symmetry(const Dynamics& dyn);
CheckResult chapman_kolmogorov(const Dynamics& dyn);
CheckResult kolmogorov_forward(const Dynamics& dyn, int samples, std::uint64_t seed);
CheckResult bessel_monotone();
CheckResult nnrw_product_structure(const Dynamics& dyn);
CheckResult urw_stationary_limit(const Dynamics& dyn);

CheckResult coupling_reconstruct(const ReweightedCoupling& rc);
CheckResult marginal_endpoints(const ScoreEngine& engine);
CheckResult marginal_preservation(const ScoreEngine& engine, double t_max = 0.9,
                                  int checkpoints = 10, double tol = 1e-6);
CheckResult score_bounds(const ScoreEngine& engine, double eta);
CheckResult score_sum_bounds(const ScoreEngine& engine, double eta);
CheckResult score_ode(const ScoreEngine& engine, std::uint64_t seed);
CheckResult evolution_identities(const ScoreEngine& engine);
CheckResult bridge_transitivity(const ScoreEngine& engine, std::uint64_t seed);
/// Non-point couplings: asserts the projected score strictly violates the
/// bridge transitivity identity somewhere (excess above 1e-3).  Point-mass
/// couplings instead assert u^M collapses onto the bridge score.
CheckResult score_transitivity_contrast(const ScoreEngine& engine);

CheckResult grid_telescoping(double h, double eta);
CheckResult law_mass(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                     const Eigen::VectorXd& mu0);
CheckResult mc_reproducibility(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                               const Eigen::VectorXd& mu0, std::uint64_t seed);
CheckResult mc_chi_square(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                          const Eigen::VectorXd& mu0, std::size_t paths, std::uint64_t seed,
                          int threads);

CheckResult loss_zero_at_exact(const ScoreEngine& engine, const TimeGrid& grid);
CheckResult loss_tractable_gap(const ScoreEngine& engine, const TimeGrid& grid,
                               std::uint64_t seed);
CheckResult loss_gradient_fd(const ScoreEngine& engine, const TimeGrid& grid, std::uint64_t seed);

CheckResult early_stopping_tv(const ScoreEngine& engine, double eta);
CheckResult pinsker_cross_check(const MarginalDist& p, const MarginalDist& q);

}  // namespace checks

/// The kernels-module suite alone (CLI `kernels-check`).
std::vector<CheckResult> run_kernel_suite(const Dynamics& dyn, std::uint64_t seed);

/// Every lemma/property check for one configured instance (CLI `verify`).
std::vector<CheckResult> run_verify_suite(const ExperimentConfig& cfg, int threads);

}  // namespace dfm
