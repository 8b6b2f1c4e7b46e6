#include "dfm/exact_engine.hpp"

#include <cmath>
#include <string>

namespace dfm {

MarginalDist::MarginalDist(double time, Eigen::VectorXd p) : t(time), probs(std::move(p)) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= -1e-12)) {
      throw NumericError("marginal: entry " + std::to_string(i) + " negative (" +
                         std::to_string(probs[i]) + ")");
    }
    if (probs[i] < 0.0) probs[i] = 0.0;
    total += probs[i];
  }
  if (!(std::abs(total - 1.0) <= 1e-6)) {
    throw NumericError("marginal: total mass " + std::to_string(total) + " outside 1e-6 of 1");
  }
  probs /= total;
}

ScoreEngine::ScoreEngine(ReweightedCoupling rc)
    : rc_(std::move(rc)),
      kernels_(rc_.dynamics()),
      jumps_(rc_.dynamics().kind(), rc_.spec()),
      states_(rc_.spec().state_count()) {
  if (states_ > kMaxExactStates) {
    throw CapacityError("score engine: state count exceeds dense capacity");
  }
}

std::shared_ptr<const Eigen::MatrixXd> ScoreEngine::numerators(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("score engine: t outside [0, 1]");
  const std::int64_t key = time_key(t);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = numerators_cache_.find(key);
    if (it != numerators_cache_.end()) return it->second;
  }
  const auto k_left = kernels_.table(t);        // K_t(a, b) = p_{t|0}(b|a)
  const auto k_right = kernels_.table(1.0 - t); // K_{1-t}
  // N(x, y) = sum_{x0} K_t(x0, x) sum_{x1} pi~(x0, x1) K_{1-t}(y, x1)
  Eigen::MatrixXd n =
      k_left->transpose() * rc_.pi_tilde() * k_right->transpose();
  auto fresh = std::make_shared<const Eigen::MatrixXd>(std::move(n));
  std::lock_guard<std::mutex> lock(mutex_);
  auto [it, inserted] = numerators_cache_.emplace(key, std::move(fresh));
  return it->second;
}

MarginalDist ScoreEngine::marginal(double t) const {
  const auto n = numerators(t);
  return MarginalDist(t, n->diagonal());
}

Eigen::MatrixXd ScoreEngine::joint_with_endpoint(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) throw InputError("score engine: t outside [0, 1]");
  const auto k_left = kernels_.table(t);
  const auto k_right = kernels_.table(1.0 - t);
  // J(x, x1) = [sum_{x0} p_{t|0}(x|x0) pi~(x0, x1)] * p_{1|t}(x1|x)
  Eigen::MatrixXd j = k_left->transpose() * rc_.pi_tilde();
  return j.cwiseProduct(*k_right);  // K_{1-t}(x, x1) = p_{1|t}(x1|x)
}

void ScoreEngine::require_score_time(double t) const {
  if (!(t >= 0.0 && t <= 1.0 - kEtaMin)) {
    throw TimeDomainError("score: t = " + std::to_string(t) +
                          " outside [0, 1 - eta_min]; the score diverges at t = 1");
  }
}

double ScoreEngine::score(double t, StateIndex x, StateIndex y) const {
  require_score_time(t);
  const auto n = numerators(t);
  const double den = (*n)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x));
  if (!(den > 0.0)) {
    throw UndefinedScoreError("score: state " + std::to_string(x) +
                              " carries zero interpolant mass at t = " + std::to_string(t));
  }
  return (*n)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) / den;
}

double ScoreEngine::score(double t, StateIndex x, const JumpOp& op) const {
  return score(t, x, apply_jump(x, op, rc_.spec()));
}

double ScoreEngine::bridge_score(double t, StateIndex x1, StateIndex x, StateIndex y) const {
  require_score_time(t);
  const double tau = 1.0 - t;
  const LatticeSpec& spec = rc_.spec();
  const int m = spec.m();
  if (rc_.dynamics().kind() == DynamicsKind::kUniform) {
    // alpha^{d_H(y,x1) - d_H(x,x1)}; the prefactors cancel
    const int diff = hamming(y, x1, spec) - hamming(x, x1, spec);
    return std::pow(urw_alpha(tau, m), diff);
  }
  // NNRW factorizes per axis; only axes where x and y differ contribute
  double ratio = 1.0;
  StateIndex xa = x, ya = y, za = x1;
  for (int i = 0; i < spec.d(); ++i) {
    const int xd = static_cast<int>(xa % m);
    const int yd = static_cast<int>(ya % m);
    const int zd = static_cast<int>(za % m);
    if (xd != yd) {
      ratio *= wrapped_skellam(zd - yd, tau, m) / wrapped_skellam(zd - xd, tau, m);
    }
    xa /= m;
    ya /= m;
    za /= m;
  }
  return ratio;
}

Eigen::MatrixXd ScoreEngine::projected_generator(double t) const {
  require_score_time(t);
  const auto n = numerators(t);
  const auto s = static_cast<Eigen::Index>(states_);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(s, s);
  const double rate = rc_.dynamics().jump_rate();
  for (Eigen::Index x = 0; x < s; ++x) {
    const double den = (*n)(x, x);
    if (!(den > 0.0)) continue;  // zero-mass rows never carry flow
    double total = 0.0;
    for (int j = 0; j < jumps_.op_count(); ++j) {
      const auto y = static_cast<Eigen::Index>(jumps_.target(static_cast<StateIndex>(x), j));
      const double entry = rate * (*n)(x, y) / den;
      q(x, y) += entry;
      total += entry;
    }
    q(x, x) = -total;
  }
  return q;
}

double ScoreEngine::score_ode_residual(double t, StateIndex x, const JumpOp& op) const {
  if (!(t >= 0.05 && t <= 1.0 - kEtaMin)) {
    throw TimeDomainError("score_ode_residual: t outside [0.05, 1 - eta_min]");
  }
  constexpr double kStep = 1e-5;
  const LatticeSpec& spec = rc_.spec();
  const StateIndex sx = apply_jump(x, op, spec);

  const double ddt = (score(t + kStep, x, sx) - score(t - kStep, x, sx)) / (2.0 * kStep);

  const auto n = numerators(t);
  const auto u = [&](StateIndex a, StateIndex b) {
    return (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) /
           (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
  };
  const auto mass = [&](StateIndex a) {
    return (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
  };

  double drift = 0.0;
  for (const JumpOp& other : jumps_.ops()) {
    const StateIndex ox = apply_jump(x, other, spec);
    const StateIndex osx = apply_jump(sx, other, spec);  // sigma'(sigma(x))
    const double ratio = mass(ox) / mass(x);
    drift += u(x, sx) * u(x, ox) - u(x, osx) +
             ratio * (u(ox, sx) - u(x, sx) * u(ox, x));
  }
  drift *= rc_.dynamics().jump_rate();
  return std::abs(ddt - drift);
}

namespace {

// Integrands of the score-mean and score-entropy evolution identities at one
// time point, as exact expectations over p_r^I.
struct EvolutionIntegrands {
  double mean_flow = 0.0;     // lambda E[sum_sigma' B_r]
  double entropy_flow = 0.0;  // lambda E[sum_sigma' C_r]
};

}  // namespace

std::pair<double, double> ScoreEngine::evolution_residuals(double s, double t,
                                                           const JumpOp& op) const {
  if (!(0.0 <= s && s <= t && t <= 1.0 - kEtaMin)) {
    throw TimeDomainError("evolution_residuals: need 0 <= s <= t <= 1 - eta_min");
  }
  if (s == t) return {0.0, 0.0};

  const LatticeSpec& spec = rc_.spec();
  const double rate = rc_.dynamics().jump_rate();

  const auto expectation_terms = [&](double r, double* mean_u, double* mean_phi,
                                     EvolutionIntegrands* flows) {
    const auto n = numerators(r);
    const auto u = [&](StateIndex a, StateIndex b) {
      return (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) /
             (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
    };
    const auto mass = [&](StateIndex a) {
      return (*n)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
    };
    const double total_mass = n->diagonal().sum();

    double acc_u = 0.0, acc_phi = 0.0, acc_b = 0.0, acc_c = 0.0;
    for (StateIndex x = 0; x < states_; ++x) {
      const double px = mass(x) / total_mass;
      if (!(px > 0.0)) continue;
      const StateIndex sx = apply_jump(x, op, spec);
      const double u_x_sx = u(x, sx);
      acc_u += px * u_x_sx;
      acc_phi += px * entropy_phi(u_x_sx);
      if (flows == nullptr) continue;
      double b_sum = 0.0, c_sum = 0.0;
      for (const JumpOp& other : jumps_.ops()) {
        const StateIndex ox = apply_jump(x, other, spec);
        const StateIndex sox = apply_jump(ox, op, spec);  // sigma(sigma'(x)) = sigma'(sigma(x))
        const double ratio = mass(ox) / mass(x);
        const double u_x_ox = u(x, ox);
        const double u_ox_sox = u(ox, sox);
        b_sum += u_x_ox * u_ox_sox - u(x, sox) +
                 ratio * (u(ox, sx) - u_x_sx * u(ox, x));
        c_sum += u(x, sox) * std::log(u_ox_sox / u_x_sx) + u_x_ox * (u_x_sx - u_ox_sox);
      }
      acc_b += px * b_sum;
      acc_c += px * c_sum;
    }
    if (mean_u != nullptr) *mean_u = acc_u;
    if (mean_phi != nullptr) *mean_phi = acc_phi;
    if (flows != nullptr) {
      flows->mean_flow = rate * acc_b;
      flows->entropy_flow = rate * acc_c;
    }
  };

  double eu_s = 0.0, ephi_s = 0.0, eu_t = 0.0, ephi_t = 0.0;
  expectation_terms(s, &eu_s, &ephi_s, nullptr);
  expectation_terms(t, &eu_t, &ephi_t, nullptr);

  // composite Simpson over 21 nodes (20 panels in pairs)
  constexpr int kNodes = 21;
  const double step = (t - s) / (kNodes - 1);
  double int_b = 0.0, int_c = 0.0;
  for (int i = 0; i < kNodes; ++i) {
    EvolutionIntegrands flows;
    expectation_terms(s + i * step, nullptr, nullptr, &flows);
    const double w = (i == 0 || i == kNodes - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    int_b += w * flows.mean_flow;
    int_c += w * flows.entropy_flow;
  }
  int_b *= step / 3.0;
  int_c *= step / 3.0;

  return {std::abs(eu_t - eu_s - int_b), std::abs(ephi_t - ephi_s - int_c)};
}

MarginalDist forward_evolve(const MarginalDist& p0,
                            const std::function<Eigen::MatrixXd(double)>& generator, double t0,
                            double t1) {
  if (!(t0 <= t1)) throw InputError("forward_evolve: t0 must not exceed t1");
  Eigen::VectorXd p = p0.probs;
  double t = t0;
  while (t < t1 - 1e-15) {
    double dt = std::min(1e-3, (1.0 - t) / 50.0);
    dt = std::min(dt, t1 - t);
    const Eigen::MatrixXd q1 = generator(t).transpose();
    const Eigen::MatrixXd q2 = generator(t + 0.5 * dt).transpose();
    const Eigen::MatrixXd q4 = generator(t + dt).transpose();
    const Eigen::VectorXd k1 = q1 * p;
    const Eigen::VectorXd k2 = q2 * (p + 0.5 * dt * k1);
    const Eigen::VectorXd k3 = q2 * (p + 0.5 * dt * k2);
    const Eigen::VectorXd k4 = q4 * (p + dt * k3);
    p += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p = p.cwiseMax(0.0);
    p /= p.sum();
    t += dt;
  }
  return MarginalDist(t1, std::move(p));
}

}  // namespace dfm
