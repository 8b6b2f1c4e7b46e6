#include "dfm/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dfm/rng.hpp"

namespace dfm {

double score_lower_bound(DynamicsKind kind, int m, double t) {
  if (kind == DynamicsKind::kNearestNeighbor) return (1.0 - t) / (5.0 * (2.0 * m + 1.0));
  return urw_alpha(1.0 - t, m);
}

double score_upper_bound(DynamicsKind kind, int m, double t) {
  if (kind == DynamicsKind::kNearestNeighbor) return 5.0 * (2.0 * m + 1.0) / (1.0 - t);
  return 1.0 / urw_alpha(1.0 - t, m);
}

double score_sum_bound(DynamicsKind kind, int m, int d, double t) {
  if (kind == DynamicsKind::kNearestNeighbor) return 10.0 * d * (2.0 * m + 1.0) / (1.0 - t);
  return d * ((std::exp(1.0) + m - 1.0) / (1.0 - t) + m - 1.0);
}

double early_stopping_tv_bound(DynamicsKind kind, int m, int d, double eta) {
  if (kind == DynamicsKind::kNearestNeighbor) return 5.0 * d * (2.0 * m + 1.0) * eta;
  return d * eta / (1.0 - std::exp(-1.0));
}

Instance build_instance(const ExperimentConfig& cfg) {
  Instance inst{cfg.make_dynamics(), build_grid(cfg.h, cfg.eta), nullptr, nullptr};
  auto engine = std::make_shared<ScoreEngine>(reweight(cfg.make_coupling(), inst.dyn));
  inst.engine = engine;
  switch (cfg.score) {
    case ScoreVariant::kExact:
      inst.model = std::make_shared<ExactScoreModel>(engine, inst.grid);
      break;
    case ScoreVariant::kPerturbed:
      inst.model = std::make_shared<PerturbedScoreModel>(engine, inst.grid, cfg.gamma, cfg.seed);
      break;
    case ScoreVariant::kTabular:
      inst.model = std::make_shared<TabularScoreModel>(
          TabularScore::load(cfg.tabular_path, cfg.lattice(), cfg.dynamics));
      break;
  }
  return inst;
}

namespace checks {

namespace {

StateIndex random_state(RngStream& rng, StateIndex states) {
  return static_cast<StateIndex>(rng.next_double() * states) % states;
}

}  // namespace

CheckResult kernel_normalization(const Dynamics& dyn, int samples, std::uint64_t seed) {
  RngStream rng(seed, 101);
  const StateIndex states = dyn.spec().state_count();
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = rng.next_double();
    const StateIndex x = random_state(rng, states);
    double row = 0.0;
    for (StateIndex y = 0; y < states; ++y) row += transition_prob(dyn, t, x, y);
    worst = std::max(worst, std::abs(row - 1.0));
  }
  return {"kernel.normalization", worst, 1e-10, worst <= 1e-10};
}

CheckResult kernel_symmetry(const Dynamics& dyn) {
  double worst = 0.0;
  for (const double t : {0.1, 0.5, 0.9}) {
    const Eigen::MatrixXd k = kernel_matrix(dyn, t);
    worst = std::max(worst, (k - k.transpose()).cwiseAbs().maxCoeff());
  }
  return {"kernel.symmetry", worst, 1e-12, worst <= 1e-12};
}

CheckResult chapman_kolmogorov(const Dynamics& dyn) {
  double worst = 0.0;
  for (const auto& [s, t] : std::vector<std::pair<double, double>>{{0.2, 0.3}, {0.45, 0.45}}) {
    const Eigen::MatrixXd lhs = kernel_matrix(dyn, s) * kernel_matrix(dyn, t);
    const Eigen::MatrixXd rhs = kernel_matrix(dyn, s + t);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return {"kernel.chapman_kolmogorov", worst, 1e-9, worst <= 1e-9};
}

CheckResult kolmogorov_forward(const Dynamics& dyn, int samples, std::uint64_t seed) {
  RngStream rng(seed, 102);
  const StateIndex states = dyn.spec().state_count();
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = 1e-3 + rng.next_double() * (1.0 - 2e-3);
    const StateIndex x = random_state(rng, states);
    worst = std::max(worst, kolmogorov_residual(dyn, t, x));
  }
  return {"kernel.kolmogorov_forward", worst, 1e-6, worst <= 1e-6};
}

CheckResult bessel_monotone() {
  // I_b(z) strictly decreasing in the order for z in (0, 2]
  double worst = -1.0;  // most positive value of I_{b+1} - I_b
  for (int b = 0; b <= 20; ++b) {
    for (const double z : {0.05, 0.5, 1.0, 1.5, 2.0}) {
      worst = std::max(worst, bessel_i(b + 1, z) - bessel_i(b, z));
    }
  }
  return {"kernel.bessel_monotone", worst, 0.0, worst < 0.0};
}

CheckResult nnrw_product_structure(const Dynamics& dyn) {
  const LatticeSpec& spec = dyn.spec();
  double worst = 0.0;
  for (const double t : {0.25, 0.75}) {
    const Eigen::VectorXd w = nnrw_kernel_1d(spec.m(), t);
    const StateIndex states = spec.state_count();
    for (StateIndex x = 0; x < states; ++x) {
      for (StateIndex y = 0; y < states; ++y) {
        double prod = 1.0;
        StateIndex xa = x, ya = y;
        for (int i = 0; i < spec.d(); ++i) {
          prod *= w[static_cast<int>(((ya % spec.m()) + spec.m() - (xa % spec.m())) % spec.m())];
          xa /= spec.m();
          ya /= spec.m();
        }
        worst = std::max(worst, std::abs(prod - transition_prob(dyn, t, x, y)));
      }
    }
  }
  return {"kernel.nnrw_product_structure", worst, 1e-12, worst <= 1e-12};
}

CheckResult urw_stationary_limit(const Dynamics& dyn) {
  const StateIndex states = dyn.spec().state_count();
  const double uniform = 1.0 / static_cast<double>(states);
  double worst = 0.0;
  for (StateIndex y = 0; y < states; ++y) {
    worst = std::max(worst, std::abs(transition_prob_unchecked(dyn, 50.0, 0, y) - uniform));
  }
  return {"kernel.urw_stationary_limit", worst, 1e-10, worst <= 1e-10};
}

CheckResult coupling_reconstruct(const ReweightedCoupling& rc) {
  const Eigen::MatrixXd k1 = kernel_matrix(rc.dynamics(), 1.0);
  const double total = rc.pi_tilde().cwiseProduct(k1).sum();
  const double measured = std::abs(total - 1.0);
  return {"coupling.reweight_reconstruct", measured, 1e-10, measured <= 1e-10};
}

CheckResult marginal_endpoints(const ScoreEngine& engine) {
  const double at0 =
      (engine.marginal(0.0).probs - engine.coupling().coupling().mu0()).cwiseAbs().maxCoeff();
  const double at1 =
      (engine.marginal(1.0).probs - engine.coupling().coupling().mu1()).cwiseAbs().maxCoeff();
  const double worst = std::max(at0, at1);
  return {"engine.marginal_endpoints", worst, 1e-10, worst <= 1e-10};
}

CheckResult marginal_preservation(const ScoreEngine& engine, double t_max, int checkpoints,
                                  double tol) {
  const auto generator = [&engine](double t) { return engine.projected_generator(t); };
  MarginalDist current = engine.marginal(0.0);
  double worst = 0.0;
  for (int j = 1; j <= checkpoints; ++j) {
    const double target = t_max * j / checkpoints;
    current = forward_evolve(current, generator, current.t, target);
    worst = std::max(worst,
                     (current.probs - engine.marginal(target).probs).cwiseAbs().maxCoeff());
  }
  return {"engine.marginal_preservation", worst, tol, worst <= tol};
}

CheckResult score_bounds(const ScoreEngine& engine, double eta) {
  const DynamicsKind kind = engine.dynamics().kind();
  const int m = engine.spec().m();
  const StateIndex states = engine.spec().state_count();
  double worst = 0.0;  // largest bound violation
  for (const double t : {0.0, 0.25, 0.5, 0.75, 1.0 - eta}) {
    const double lo = score_lower_bound(kind, m, t);
    const double hi = score_upper_bound(kind, m, t);
    const auto n = engine.numerators(t);
    for (StateIndex x = 0; x < states; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      if (!((*n)(xi, xi) > 0.0)) continue;  // score undefined off the support
      for (int op = 0; op < engine.jumps().op_count(); ++op) {
        const auto yi = static_cast<Eigen::Index>(engine.jumps().target(x, op));
        const double u = (*n)(xi, yi) / (*n)(xi, xi);
        worst = std::max({worst, lo - u, u - hi});
      }
    }
  }
  return {"lemma1.score_bounds", worst, 1e-12, worst <= 1e-12};
}

CheckResult score_sum_bounds(const ScoreEngine& engine, double eta) {
  const DynamicsKind kind = engine.dynamics().kind();
  const int m = engine.spec().m();
  const int d = engine.spec().d();
  const StateIndex states = engine.spec().state_count();
  double worst = 0.0;
  for (const double t : {0.0, 0.25, 0.5, 0.75, 1.0 - eta}) {
    const double cap = score_sum_bound(kind, m, d, t);
    const auto n = engine.numerators(t);
    for (StateIndex x = 0; x < states; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      if (!((*n)(xi, xi) > 0.0)) continue;
      double total = 0.0;
      for (int op = 0; op < engine.jumps().op_count(); ++op) {
        total += (*n)(xi, static_cast<Eigen::Index>(engine.jumps().target(x, op))) / (*n)(xi, xi);
      }
      worst = std::max(worst, total - cap);
    }
  }
  return {"lemma1.sum_of_scores_bound", worst, 1e-12, worst <= 1e-12};
}

CheckResult score_ode(const ScoreEngine& engine, std::uint64_t seed) {
  RngStream rng(seed, 103);
  const StateIndex states = engine.spec().state_count();
  const int ops = engine.jumps().op_count();
  double worst = 0.0;
  for (const double t : {0.3, 0.5, 0.7}) {
    for (int i = 0; i < 5; ++i) {
      const StateIndex x = random_state(rng, states);
      const int op = static_cast<int>(rng.next_double() * ops) % ops;
      worst = std::max(worst, engine.score_ode_residual(t, x, engine.jumps().ops()[op]));
    }
  }
  return {"lemma2.score_ode_residual", worst, 1e-5, worst <= 1e-5};
}

CheckResult evolution_identities(const ScoreEngine& engine) {
  const auto& ops = engine.jumps().ops();
  double worst = 0.0;
  for (const auto& [s, t] : std::vector<std::pair<double, double>>{{0.2, 0.6}, {0.1, 0.5}}) {
    for (const JumpOp& op : {ops.front(), ops.back()}) {
      const auto [mean_res, entropy_res] = engine.evolution_residuals(s, t, op);
      worst = std::max({worst, mean_res, entropy_res});
    }
  }
  return {"lemma3.evolution_residuals", worst, 1e-6, worst <= 1e-6};
}

CheckResult bridge_transitivity(const ScoreEngine& engine, std::uint64_t seed) {
  RngStream rng(seed, 104);
  const StateIndex states = engine.spec().state_count();
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double t = 0.05 + 0.9 * rng.next_double();
    const StateIndex x1 = random_state(rng, states);
    const StateIndex x = random_state(rng, states);
    const StateIndex y = random_state(rng, states);
    const StateIndex z = random_state(rng, states);
    const double lhs =
        engine.bridge_score(t, x1, x, y) * engine.bridge_score(t, x1, y, z);
    worst = std::max(worst, std::abs(lhs - engine.bridge_score(t, x1, x, z)));
  }
  return {"engine.bridge_transitivity", worst, 1e-12, worst <= 1e-12};
}

CheckResult score_transitivity_contrast(const ScoreEngine& engine) {
  const LatticeSpec& spec = engine.spec();
  const StateIndex states = spec.state_count();
  const bool point = engine.coupling().coupling().is_point_mass();
  double extreme = point ? 0.0 : -1.0;
  for (const double t : {0.3, 0.5, 0.7}) {
    const auto n = engine.numerators(t);
    const auto u = [&](StateIndex a, StateIndex b) {
      return (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) /
             (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
    };
    for (StateIndex x = 0; x < states; ++x) {
      if (!((*n)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) > 0.0)) continue;
      for (const JumpOp& a : engine.jumps().ops()) {
        const StateIndex y = apply_jump(x, a, spec);
        for (const JumpOp& b : engine.jumps().ops()) {
          const StateIndex z = apply_jump(y, b, spec);
          const double gap = std::abs(u(x, y) * u(y, z) - u(x, z));
          extreme = std::max(extreme, gap);
        }
      }
    }
  }
  if (point) {
    // degenerate couplings collapse u^M onto the (transitive) bridge score
    return {"engine.point_mass_score_transitive", extreme, 1e-12, extreme <= 1e-12};
  }
  // generic couplings must break transitivity (the identity that standard
  // discrete diffusion enjoys and DFM does not)
  return {"engine.score_transitivity_violated", extreme, 1e-3, extreme > 1e-3};
}

CheckResult grid_telescoping(double h, double eta) {
  const TimeGrid grid = build_grid(h, eta);
  double product = 1.0;
  for (int k = 0; k < grid.interval_count; ++k) {
    product *= (1.0 - grid.points[k + 1]) / (1.0 - grid.points[k]);
  }
  const double measured = std::abs(product - eta);
  return {"sampler.grid_telescoping", measured, 1e-12, measured <= 1e-12};
}

CheckResult law_mass(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                     const Eigen::VectorXd& mu0) {
  double defect = 0.0;
  algorithm_law(model, grid, dyn, mu0, &defect);
  return {"sampler.law_mass", defect, 1e-9, defect <= 1e-9};
}

CheckResult mc_reproducibility(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                               const Eigen::VectorXd& mu0, std::uint64_t seed) {
  const std::size_t n = 2000;
  const auto a = sample_paths(model, grid, dyn, mu0, n, seed, 1);
  const auto b = sample_paths(model, grid, dyn, mu0, n, seed, 3);
  double mismatches = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].final_state != b[i].final_state || a[i].events.size() != b[i].events.size()) {
      mismatches += 1.0;
      continue;
    }
    for (std::size_t e = 0; e < a[i].events.size(); ++e) {
      const auto& ea = a[i].events[e];
      const auto& eb = b[i].events[e];
      if (ea.time != eb.time || ea.from != eb.from || ea.op_id != eb.op_id || ea.to != eb.to) {
        mismatches += 1.0;
        break;
      }
    }
  }
  return {"sampler.thread_reproducibility", mismatches, 0.0, mismatches == 0.0};
}

CheckResult mc_chi_square(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                          const Eigen::VectorXd& mu0, std::size_t paths, std::uint64_t seed,
                          int threads) {
  const MarginalDist law = algorithm_law(model, grid, dyn, mu0);
  const auto samples = sample_paths(model, grid, dyn, mu0, paths, seed, threads);
  std::vector<StateIndex> finals;
  finals.reserve(samples.size());
  for (const auto& p : samples) finals.push_back(p.final_state);
  const auto hist = EmpiricalDist::from_samples(finals, dyn.spec().state_count());
  const double p_value = chi_square_pvalue(hist, law.probs);
  return {"sampler.mc_vs_exact_law_chi2", p_value, 0.001, p_value > 0.001};
}

CheckResult loss_zero_at_exact(const ScoreEngine& engine, const TimeGrid& grid) {
  const TabularScore exact = TabularScore::snapshot(engine, grid);
  const double measured = loss_report(make_score_fn(exact), engine, grid).l_total;
  return {"loss.zero_at_exact_score", measured, 1e-12, measured <= 1e-12};
}

CheckResult loss_tractable_gap(const ScoreEngine& engine, const TimeGrid& grid,
                               std::uint64_t seed) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 5; ++i) {
    const TabularScore theta = TabularScore::snapshot(engine, grid, 0.4, seed + i);
    const LossReport report = loss_report(make_score_fn(theta), engine, grid);
    const double gap = report.l_tractable - report.l_total;
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
  }
  const double spread = hi - lo;
  return {"loss.tractable_gap_constant", spread, 1e-9, spread <= 1e-9};
}

CheckResult loss_gradient_fd(const ScoreEngine& engine, const TimeGrid& grid,
                             std::uint64_t seed) {
  TabularScore theta = TabularScore::snapshot(engine, grid, 0.3, seed + 7);
  const std::vector<double> grad = loss_gradient(theta, engine, grid);
  RngStream rng(seed, 105);
  constexpr double kStep = 1e-6;
  double worst = 0.0;
  const int coords = static_cast<int>(std::min<std::size_t>(100, theta.parameter_count()));
  for (int i = 0; i < coords; ++i) {
    const std::size_t idx =
        static_cast<std::size_t>(rng.next_double() * theta.parameter_count()) %
        theta.parameter_count();
    auto& psi = theta.log_values();
    const double saved = psi[idx];
    psi[idx] = saved + kStep;
    const double up = loss_report(make_score_fn(theta), engine, grid).l_total;
    psi[idx] = saved - kStep;
    const double down = loss_report(make_score_fn(theta), engine, grid).l_total;
    psi[idx] = saved;
    const double fd = (up - down) / (2.0 * kStep);
    const double scale = std::max({1e-12, std::abs(fd), std::abs(grad[idx])});
    worst = std::max(worst, std::abs(fd - grad[idx]) / scale);
  }
  return {"loss.gradient_matches_fd", worst, 1e-5, worst <= 1e-5};
}

CheckResult early_stopping_tv(const ScoreEngine& engine, double eta) {
  const double tv = tv_distance(engine.marginal(1.0 - eta), engine.marginal(1.0));
  const double bound = early_stopping_tv_bound(engine.dynamics().kind(), engine.spec().m(),
                                               engine.spec().d(), eta);
  return {"early_stopping.tv_bound", tv, bound, tv <= bound};
}

CheckResult pinsker_cross_check(const MarginalDist& p, const MarginalDist& q) {
  const double kl = kl_divergence(p, q);
  const double tv = tv_distance(p, q);
  // kl of near-identical vectors can round to a tiny negative value
  const double cap = std::isinf(kl) ? std::numeric_limits<double>::infinity()
                                    : std::sqrt(0.5 * std::max(kl, 0.0)) + 1e-12;
  return {"metrics.pinsker", tv, cap, tv <= cap};
}

}  // namespace checks

std::vector<CheckResult> run_kernel_suite(const Dynamics& dyn, std::uint64_t seed) {
  std::vector<CheckResult> results;
  results.push_back(checks::kernel_normalization(dyn, 50, seed));
  results.push_back(checks::kernel_symmetry(dyn));
  results.push_back(checks::chapman_kolmogorov(dyn));
  results.push_back(checks::kolmogorov_forward(dyn, 20, seed));
  results.push_back(checks::bessel_monotone());
  if (dyn.kind() == DynamicsKind::kNearestNeighbor) {
    results.push_back(checks::nnrw_product_structure(dyn));
  } else {
    results.push_back(checks::urw_stationary_limit(dyn));
  }
  return results;
}

std::vector<CheckResult> run_verify_suite(const ExperimentConfig& cfg, int threads) {
  const Instance inst = build_instance(cfg);
  const ScoreEngine& engine = *inst.engine;
  const Eigen::VectorXd& mu0 = engine.coupling().coupling().mu0();

  std::vector<CheckResult> results = run_kernel_suite(inst.dyn, cfg.seed);
  results.push_back(checks::coupling_reconstruct(engine.coupling()));
  results.push_back(checks::marginal_endpoints(engine));
  results.push_back(checks::marginal_preservation(engine));
  results.push_back(checks::score_bounds(engine, 0.01));
  results.push_back(checks::score_sum_bounds(engine, 0.01));
  results.push_back(checks::score_ode(engine, cfg.seed));
  results.push_back(checks::evolution_identities(engine));
  results.push_back(checks::bridge_transitivity(engine, cfg.seed));
  results.push_back(checks::score_transitivity_contrast(engine));
  results.push_back(checks::grid_telescoping(cfg.h, cfg.eta));
  results.push_back(checks::law_mass(*inst.model, inst.grid, inst.dyn, mu0));
  results.push_back(checks::mc_reproducibility(*inst.model, inst.grid, inst.dyn, mu0, cfg.seed));
  results.push_back(
      checks::mc_chi_square(*inst.model, inst.grid, inst.dyn, mu0, 200000, cfg.seed, threads));
  results.push_back(checks::loss_zero_at_exact(engine, inst.grid));
  results.push_back(checks::loss_tractable_gap(engine, inst.grid, cfg.seed));
  results.push_back(checks::loss_gradient_fd(engine, inst.grid, cfg.seed));
  results.push_back(checks::early_stopping_tv(engine, cfg.eta));
  results.push_back(checks::pinsker_cross_check(
      engine.marginal(1.0 - cfg.eta),
      algorithm_law(*inst.model, inst.grid, inst.dyn, mu0)));
  return results;
}

}  // namespace dfm
