#include "dfm/losses.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dfm {

using nlohmann::json;

TabularScore::TabularScore(TimeGrid grid, LatticeSpec spec, DynamicsKind kind)
    : grid_(std::move(grid)), spec_(spec), kind_(kind) {
  op_count_ = static_cast<int>(jump_family(kind, spec).size());
  if (spec.state_count() > kMaxExactStates) {
    throw CapacityError("tabular score: state count exceeds dense capacity");
  }
  log_values_.assign(
      static_cast<std::size_t>(grid_.interval_count) * spec.state_count() * op_count_, 0.0);
}

std::size_t TabularScore::flat_index(int k, StateIndex x, int op_id) const {
  return (static_cast<std::size_t>(k) * spec_.state_count() + x) * op_count_ + op_id;
}

double TabularScore::value(int k, StateIndex x, int op_id) const {
  return std::exp(log_values_[flat_index(k, x, op_id)]);
}

double TabularScore::log_value(int k, StateIndex x, int op_id) const {
  return log_values_[flat_index(k, x, op_id)];
}

void TabularScore::set_value(int k, StateIndex x, int op_id, double value) {
  if (!(value > 0.0)) throw InputError("tabular score: entries must be strictly positive");
  log_values_[flat_index(k, x, op_id)] = std::log(value);
}

void TabularScore::set_log_value(int k, StateIndex x, int op_id, double log_value) {
  if (!std::isfinite(log_value)) throw InputError("tabular score: log entry must be finite");
  log_values_[flat_index(k, x, op_id)] = log_value;
}

TabularScore TabularScore::snapshot(const ScoreEngine& engine, const TimeGrid& grid, double gamma,
                                    std::uint64_t noise_seed) {
  TabularScore table(grid, engine.spec(), engine.dynamics().kind());
  const StateIndex states = engine.spec().state_count();
  for (int k = 0; k < grid.interval_count; ++k) {
    const auto n = engine.numerators(grid.points[k]);
    for (StateIndex x = 0; x < states; ++x) {
      const double den = (*n)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x));
      for (int op = 0; op < table.op_count(); ++op) {
        double log_u = 0.0;  // neutral on zero-mass states
        if (den > 0.0) {
          const auto y = static_cast<Eigen::Index>(engine.jumps().target(x, op));
          log_u = std::log((*n)(static_cast<Eigen::Index>(x), y) / den);
        }
        if (gamma != 0.0) {
          log_u += gamma * keyed_normal(noise_seed, static_cast<std::uint64_t>(k), x,
                                        static_cast<std::uint64_t>(op));
        }
        table.set_log_value(k, x, op, log_u);
      }
    }
  }
  return table;
}

std::string TabularScore::to_json_text() const {
  json theta = json::array();
  for (int k = 0; k < grid_.interval_count; ++k) {
    for (StateIndex x = 0; x < spec_.state_count(); ++x) {
      for (int op = 0; op < op_count_; ++op) {
        theta.push_back({k, x, op, value(k, x, op)});
      }
    }
  }
  const json j = {{"grid", {{"h", grid_.h}, {"eta", grid_.eta}}}, {"theta", theta}};
  return j.dump();
}

TabularScore TabularScore::from_json_text(const std::string& text, const LatticeSpec& spec,
                                          DynamicsKind kind) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw InputError("tabular score: not valid JSON");
  if (!j.contains("grid") || !j.contains("theta")) {
    throw InputError("tabular score: requires \"grid\" and \"theta\" fields");
  }
  const TimeGrid grid = build_grid(j.at("grid").at("h").get<double>(),
                                   j.at("grid").at("eta").get<double>());
  TabularScore table(grid, spec, kind);
  for (const json& row : j.at("theta")) {
    if (!row.is_array() || row.size() != 4) {
      throw InputError("tabular score: theta rows must be [k, state_index, op_id, value]");
    }
    const int k = row[0].get<int>();
    const StateIndex x = row[1].get<StateIndex>();
    const int op = row[2].get<int>();
    if (k < 0 || k >= grid.interval_count || x >= spec.state_count() || op < 0 ||
        op >= table.op_count()) {
      throw InputError("tabular score: theta row outside table bounds");
    }
    table.set_value(k, x, op, row[3].get<double>());
  }
  return table;
}

void TabularScore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("tabular score: cannot write " + path);
  out << to_json_text() << '\n';
}

TabularScore TabularScore::load(const std::string& path, const LatticeSpec& spec,
                                DynamicsKind kind) {
  std::ifstream in(path);
  if (!in) throw InputError("tabular score: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), spec, kind);
}

ScoreFn make_score_fn(const TabularScore& table) {
  return [&table](int k, StateIndex x, int op_id) { return table.value(k, x, op_id); };
}

ScoreFn make_score_fn(const ScoreModel& model) {
  return [&model](int k, StateIndex x, int op_id) { return model.score(k, x, op_id); };
}

namespace {

struct IntervalContext {
  std::shared_ptr<const Eigen::MatrixXd> numerators;
  double total_mass = 0.0;
};

double theta_rate(const ScoreFn& theta, double lambda, int k, StateIndex x, int op) {
  const double value = theta(k, x, op);
  if (std::isnan(value) || value <= 0.0) {
    throw InputError("loss: theta(k=" + std::to_string(k) + ", x=" + std::to_string(x) +
                     ", op=" + std::to_string(op) + ") is not strictly positive");
  }
  // +inf passes through: an overflowed trial point evaluates to an infinite
  // loss and gets rejected by backtracking rather than aborting the run
  return lambda * value;
}

// entropy integrand q^theta phi(q^M / q^theta) expanded as
// q^M log(q^M / q^theta) + q^theta - q^M (well-defined also when q^M = 0)
double entropy_term(double q_m, double q_theta) {
  const double base = q_theta - q_m;
  if (q_m <= 0.0) return base;
  return q_m * std::log(q_m / q_theta) + base;
}

}  // namespace

LossReport loss_report(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid) {
  const StateIndex states = engine.spec().state_count();
  const double lambda = engine.dynamics().jump_rate();
  const int op_count = engine.jumps().op_count();

  LossReport report;
  report.per_interval_total.assign(grid.interval_count, 0.0);

  for (int k = 0; k < grid.interval_count; ++k) {
    const double t = grid.points[k];
    const double weight = grid.step(k);
    const auto n = engine.numerators(t);
    const double total_mass = n->diagonal().sum();
    const Eigen::MatrixXd joint = engine.joint_with_endpoint(t);

    double acc_entropy = 0.0, acc_two = 0.0, acc_tractable = 0.0;
    for (StateIndex x = 0; x < states; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      const double den = (*n)(xi, xi);
      if (!(den > 0.0)) continue;  // zero-mass states never contribute
      const double px = den / total_mass;
      for (int op = 0; op < op_count; ++op) {
        const StateIndex y = engine.jumps().target(x, op);
        const double q_m = lambda * (*n)(xi, static_cast<Eigen::Index>(y)) / den;
        const double q_theta = theta_rate(theta, lambda, k, x, op);
        acc_entropy += px * entropy_term(q_m, q_theta);
        acc_two += px * (q_theta - q_m) * (q_theta - q_m);
        // tractable form averages over the joint law of (X_t, X_1)
        const double log_q_theta = std::log(q_theta);
        for (StateIndex x1 = 0; x1 < states; ++x1) {
          const double jw = joint(xi, static_cast<Eigen::Index>(x1));
          if (jw == 0.0) continue;
          const double q_cond = lambda * engine.bridge_score(t, x1, x, y);
          acc_tractable +=
              jw * (-q_cond * log_q_theta + q_theta + (q_theta - q_cond) * (q_theta - q_cond));
        }
      }
    }
    report.l_entropy += weight * acc_entropy;
    report.l_two += weight * acc_two;
    report.l_tractable += weight * acc_tractable;
    report.per_interval_total[k] = weight * (acc_entropy + acc_two);
  }
  report.l_total = report.l_entropy + report.l_two;
  return report;
}

double loss_entropy(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid) {
  return loss_report(theta, engine, grid).l_entropy;
}

double loss_l2(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid) {
  return loss_report(theta, engine, grid).l_two;
}

double loss_tractable(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid) {
  return loss_report(theta, engine, grid).l_tractable;
}

double epsilon_tilde(const ScoreFn& theta, const ScoreEngine& engine, const TimeGrid& grid) {
  return std::sqrt(loss_report(theta, engine, grid).l_total);
}

std::vector<double> loss_gradient(const TabularScore& theta, const ScoreEngine& engine,
                                  const TimeGrid& grid) {
  const StateIndex states = engine.spec().state_count();
  const double lambda = engine.dynamics().jump_rate();
  const int op_count = engine.jumps().op_count();
  std::vector<double> grad(theta.parameter_count(), 0.0);

  for (int k = 0; k < grid.interval_count; ++k) {
    const double weight = grid.step(k);
    const auto n = engine.numerators(grid.points[k]);
    const double total_mass = n->diagonal().sum();
    for (StateIndex x = 0; x < states; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      const double den = (*n)(xi, xi);
      if (!(den > 0.0)) continue;
      const double px = den / total_mass;
      for (int op = 0; op < op_count; ++op) {
        const StateIndex y = engine.jumps().target(x, op);
        const double q_m = lambda * (*n)(xi, static_cast<Eigen::Index>(y)) / den;
        const double q_theta = lambda * theta.value(k, x, op);
        const double g = weight * px * (q_theta - q_m) * (1.0 + 2.0 * q_theta);
        if (!std::isfinite(g)) {
          throw NumericError("loss gradient: non-finite at (k=" + std::to_string(k) +
                             ", x=" + std::to_string(x) + ", op=" + std::to_string(op) + ")");
        }
        grad[theta.flat_index(k, x, op)] = g;
      }
    }
  }
  return grad;
}

TrainResult train_tabular(const ScoreEngine& engine, const TimeGrid& grid, TabularScore init,
                          double learning_rate, int steps) {
  if (!(learning_rate > 0.0)) throw InputError("train: learning rate must be positive");
  if (steps < 1) throw InputError("train: step count must be >= 1");

  TrainResult result{std::move(init), {}};
  const auto evaluate = [&](const TabularScore& theta) {
    return loss_report(make_score_fn(theta), engine, grid);
  };

  LossReport current = evaluate(result.theta);
  result.history.push_back({0, current.l_entropy, current.l_two, current.l_total});

  for (int step = 1; step <= steps; ++step) {
    const std::vector<double> grad = loss_gradient(result.theta, engine, grid);
    double grad_norm = 0.0;
    for (const double g : grad) grad_norm = std::max(grad_norm, std::abs(g));
    if (grad_norm <= 1e-12) break;

    // per-step backtracking from the base rate
    double lr = learning_rate;
    bool accepted = false;
    for (int halving = 0; halving <= 30; ++halving) {
      TabularScore trial = result.theta;
      auto& psi = trial.log_values();
      for (std::size_t i = 0; i < psi.size(); ++i) psi[i] -= lr * grad[i];
      const LossReport trial_loss = evaluate(trial);
      if (trial_loss.l_total <= current.l_total) {  // NaN/inf trials fail here
        result.theta = std::move(trial);
        current = trial_loss;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;  // no descent direction at float resolution
    result.history.push_back({step, current.l_entropy, current.l_two, current.l_total});
  }
  return result;
}

}  // namespace dfm
