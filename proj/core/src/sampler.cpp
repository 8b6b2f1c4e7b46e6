#include "dfm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace dfm {

TimeGrid build_grid(double h, double eta) {
  // closed right endpoints so the K=1 grid (h=1, eta=1/2) is representable
  if (!(h > 0.0 && h <= 1.0)) throw InputError("grid: h must lie in (0, 1]");
  if (!(eta >= 1e-3 && eta <= 0.5)) throw InputError("grid: eta must lie in [1e-3, 0.5]");
  // smallest K with (1+h)^{-K} <= eta; the epsilon keeps exact integer ratios
  // (e.g. eta = 0.25, h = 1) from rounding up
  const double ratio = std::log(1.0 / eta) / std::log1p(h);
  const int k_count = static_cast<int>(std::ceil(ratio - 1e-12));

  TimeGrid grid;
  grid.h = h;
  grid.eta = eta;
  grid.interval_count = k_count;
  grid.points.resize(k_count + 1);
  grid.points[0] = 0.0;
  for (int k = 1; k < k_count; ++k) grid.points[k] = 1.0 - std::pow(1.0 + h, -k);
  grid.points[k_count] = 1.0 - eta;
  for (int k = 0; k < k_count; ++k) {
    if (!(grid.points[k] < grid.points[k + 1])) {
      throw NumericError("grid: points not strictly increasing");
    }
  }
  return grid;
}

ExactScoreModel::ExactScoreModel(std::shared_ptr<const ScoreEngine> engine, TimeGrid grid)
    : engine_(std::move(engine)), grid_(std::move(grid)) {
  op_count_ = static_cast<int>(engine_->jumps().op_count());
  tables_.resize(grid_.interval_count);
}

const std::vector<double>& ExactScoreModel::table(int k) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (tables_[k]) return *tables_[k];
  }
  const double t = grid_.points[k];
  const auto n = engine_->numerators(t);
  const StateIndex states = engine_->spec().state_count();
  auto fresh = std::make_shared<std::vector<double>>(states * op_count_);
  for (StateIndex x = 0; x < states; ++x) {
    const double den = (*n)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x));
    for (int j = 0; j < op_count_; ++j) {
      const auto y = static_cast<Eigen::Index>(engine_->jumps().target(x, j));
      (*fresh)[x * op_count_ + j] =
          den > 0.0 ? (*n)(static_cast<Eigen::Index>(x), y) / den
                    : std::numeric_limits<double>::quiet_NaN();
    }
  }
  std::lock_guard<std::mutex> lock(mutex_);
  if (!tables_[k]) tables_[k] = std::move(fresh);
  return *tables_[k];
}

double ExactScoreModel::score(int k, StateIndex x, int op_id) const {
  const double u = table(k)[x * op_count_ + op_id];
  if (std::isnan(u)) {
    throw UndefinedScoreError("score model: state " + std::to_string(x) +
                              " has zero interpolant mass at grid point " + std::to_string(k));
  }
  return u;
}

PerturbedScoreModel::PerturbedScoreModel(std::shared_ptr<const ScoreEngine> engine, TimeGrid grid,
                                         double gamma, std::uint64_t noise_seed)
    : exact_(std::move(engine), std::move(grid)), gamma_(gamma), noise_seed_(noise_seed) {
  if (!(gamma >= 0.0)) throw InputError("perturbed score: gamma must be >= 0");
}

double PerturbedScoreModel::score(int k, StateIndex x, int op_id) const {
  const double u = exact_.score(k, x, op_id);
  if (gamma_ == 0.0) return u;
  const double g = keyed_normal(noise_seed_, static_cast<std::uint64_t>(k), x,
                                static_cast<std::uint64_t>(op_id));
  return u * std::exp(gamma_ * g);
}

namespace {

PathSample run_path(const ScoreModel& model, const TimeGrid& grid, const JumpTable& jumps,
                    double lambda, StateIndex init, std::uint64_t seed, std::uint64_t path_id,
                    RngStream& rng) {
  PathSample path;
  path.seed = seed;
  path.path_id = path_id;
  StateIndex x = init;

  const int op_count = jumps.op_count();
  std::vector<double> cumulative(op_count);
  for (int k = 0; k < grid.interval_count; ++k) {
    const double t_next = grid.points[k + 1];
    // rates frozen at the interval-start state; not refreshed after jumps
    const StateIndex frozen_state = x;
    double total = 0.0;
    for (int j = 0; j < op_count; ++j) {
      const double rate = lambda * model.score(k, frozen_state, j);
      if (!(rate >= 0.0)) throw NumericError("sampler: negative or NaN jump rate");
      total += rate;
      cumulative[j] = total;
    }
    if (total <= 0.0) continue;  // degenerate model: hold until the next grid point

    double t = grid.points[k];
    for (;;) {
      t += rng.next_exponential(total);
      if (t >= t_next) break;
      const double pick = rng.next_double() * total;
      const int op_id = static_cast<int>(
          std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
      const int chosen = std::min(op_id, op_count - 1);
      const StateIndex y = jumps.target(x, chosen);
      path.events.push_back({t, x, chosen, y});
      x = y;
    }
  }
  path.final_state = x;
  return path;
}

}  // namespace

PathSample simulate_path(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                         StateIndex init, std::uint64_t seed, std::uint64_t path_id) {
  const JumpTable jumps(dyn.kind(), dyn.spec());
  RngStream rng(seed, path_id);
  return run_path(model, grid, jumps, dyn.jump_rate(), init, seed, path_id, rng);
}

std::vector<PathSample> sample_paths(const ScoreModel& model, const TimeGrid& grid,
                                     const Dynamics& dyn, const Eigen::VectorXd& mu0,
                                     std::size_t n, std::uint64_t seed, int threads) {
  if (threads < 1) throw InputError("sample_paths: thread count must be >= 1");
  const StateIndex states = dyn.spec().state_count();
  if (static_cast<StateIndex>(mu0.size()) != states) {
    throw InputError("sample_paths: mu0 size does not match the lattice");
  }
  // inverse-CDF table over state indices
  std::vector<double> cdf(states);
  double acc = 0.0;
  for (StateIndex i = 0; i < states; ++i) {
    if (!(mu0[static_cast<Eigen::Index>(i)] >= 0.0)) {
      throw InputError("sample_paths: mu0 has a negative entry");
    }
    acc += mu0[static_cast<Eigen::Index>(i)];
    cdf[i] = acc;
  }
  if (!(std::abs(acc - 1.0) <= 1e-6)) throw InputError("sample_paths: mu0 must sum to 1");

  const JumpTable jumps(dyn.kind(), dyn.spec());
  const double lambda = dyn.jump_rate();
  std::vector<PathSample> out(n);

  const auto worker = [&](std::size_t first, std::size_t last) {
    for (std::size_t i = first; i < last; ++i) {
      RngStream rng(seed, i);
      const double u = rng.next_double() * acc;
      const StateIndex init = static_cast<StateIndex>(
          std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      out[i] = run_path(model, grid, jumps, lambda, std::min(init, states - 1), seed, i, rng);
    }
  };

  if (threads == 1 || n < 2) {
    worker(0, n);
  } else {
    const std::size_t used = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(used);
    const std::size_t chunk = (n + used - 1) / used;
    for (std::size_t w = 0; w < used; ++w) {
      const std::size_t first = w * chunk;
      const std::size_t last = std::min(n, first + chunk);
      if (first >= last) break;
      pool.emplace_back(worker, first, last);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

MarginalDist algorithm_law(const ScoreModel& model, const TimeGrid& grid, const Dynamics& dyn,
                           const Eigen::VectorXd& mu0, double* raw_mass_defect) {
  const StateIndex states = dyn.spec().state_count();
  if (states > kMaxExactStates) throw CapacityError("algorithm_law: state count exceeds capacity");
  if (static_cast<StateIndex>(mu0.size()) != states) {
    throw InputError("algorithm_law: mu0 size does not match the lattice");
  }
  const JumpTable jumps(dyn.kind(), dyn.spec());
  const int op_count = jumps.op_count();
  const double lambda = dyn.jump_rate();
  const auto s = static_cast<Eigen::Index>(states);

  Eigen::VectorXd mu = mu0 / mu0.sum();
  std::vector<double> rates(op_count);

  for (int k = 0; k < grid.interval_count; ++k) {
    const double step_len = grid.step(k);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(s);
    for (StateIndex start = 0; start < states; ++start) {
      const double mass = mu[static_cast<Eigen::Index>(start)];
      if (!(mass > 0.0)) continue;
      double total = 0.0;
      for (int j = 0; j < op_count; ++j) {
        rates[j] = lambda * model.score(k, start, j);
        total += rates[j];
      }
      // forward equation with rates frozen at (t_k, start); generator
      // applies operator j from any current state at rate rates[j]
      const auto derivative = [&](const Eigen::VectorXd& p, Eigen::VectorXd& dp) {
        dp = -total * p;
        for (StateIndex z = 0; z < states; ++z) {
          const double pz = p[static_cast<Eigen::Index>(z)];
          if (pz == 0.0) continue;
          for (int j = 0; j < op_count; ++j) {
            dp[static_cast<Eigen::Index>(jumps.target(z, j))] += rates[j] * pz;
          }
        }
      };
      Eigen::VectorXd p = Eigen::VectorXd::Zero(s);
      p[static_cast<Eigen::Index>(start)] = 1.0;
      // keep total-rate * dt <= 1/200 so classical RK4 is far below tolerance
      const int steps = std::max(1, static_cast<int>(std::ceil(step_len * total * 200.0)));
      const double dt = step_len / steps;
      Eigen::VectorXd k1(s), k2(s), k3(s), k4(s), tmp(s);
      for (int it = 0; it < steps; ++it) {
        derivative(p, k1);
        tmp = p + 0.5 * dt * k1;
        derivative(tmp, k2);
        tmp = p + 0.5 * dt * k2;
        derivative(tmp, k3);
        tmp = p + dt * k3;
        derivative(tmp, k4);
        p += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      next += mass * p;
    }
    mu = next;
  }
  if (raw_mass_defect != nullptr) *raw_mass_defect = std::abs(mu.sum() - 1.0);
  return MarginalDist(1.0 - grid.eta, std::move(mu));
}

}  // namespace dfm
