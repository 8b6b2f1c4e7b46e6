#include "dfm/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dfm {

namespace {

void require_same_size(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const char* what) {
  if (p.size() != q.size()) {
    throw InputError(std::string(what) + ": dimension mismatch (" + std::to_string(p.size()) +
                     " vs " + std::to_string(q.size()) + ")");
  }
}

}  // namespace

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  require_same_size(p, q, "kl");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    sum += p[i] * std::log(p[i] / q[i]);
  }
  return sum;
}

double kl_divergence(const MarginalDist& p, const MarginalDist& q) {
  return kl_divergence(p.probs, q.probs);
}

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  require_same_size(p, q, "tv");
  return 0.5 * (p - q).cwiseAbs().sum();
}

double tv_distance(const MarginalDist& p, const MarginalDist& q) {
  return tv_distance(p.probs, q.probs);
}

EmpiricalDist EmpiricalDist::from_samples(const std::vector<StateIndex>& finals,
                                          StateIndex state_count) {
  EmpiricalDist e;
  e.counts.assign(state_count, 0);
  for (const StateIndex x : finals) {
    if (x >= state_count) throw InputError("empirical: sample index outside state space");
    ++e.counts[x];
  }
  e.total = static_cast<std::int64_t>(finals.size());
  if (e.total <= 0) throw InputError("empirical: no samples");
  return e;
}

Eigen::VectorXd EmpiricalDist::frequencies() const {
  Eigen::VectorXd f(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t i = 0; i < counts.size(); ++i) {
    f[static_cast<Eigen::Index>(i)] = static_cast<double>(counts[i]) / total;
  }
  return f;
}

namespace {

// Regularized lower incomplete gamma P(s, x) by series; Q by continued
// fraction (modified Lentz).  Standard choices, accurate to ~1e-14 here.
double gamma_p_series(double s, double x) {
  double term = 1.0 / s;
  double sum = term;
  double a = s;
  for (int n = 0; n < 10000; ++n) {
    a += 1.0;
    term *= x / a;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

double gamma_q_cf(double s, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + s * std::log(x) - std::lgamma(s));
}

}  // namespace

double regularized_gamma_q(double s, double x) {
  if (!(s > 0.0) || x < 0.0) throw InputError("gamma_q: need s > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < s + 1.0) return 1.0 - gamma_p_series(s, x);
  return gamma_q_cf(s, x);
}

double chi_square_pvalue(const EmpiricalDist& observed, const Eigen::VectorXd& probs) {
  if (static_cast<Eigen::Index>(observed.counts.size()) != probs.size()) {
    throw InputError("chi_square: dimension mismatch");
  }
  const double n = static_cast<double>(observed.total);
  // pool low-expectation cells so the chi-square approximation holds
  double stat = 0.0;
  double pooled_expected = 0.0;
  double pooled_observed = 0.0;
  int cells = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double expected = n * probs[i];
    const double seen = static_cast<double>(observed.counts[i]);
    if (expected < 5.0) {
      pooled_expected += expected;
      pooled_observed += seen;
      continue;
    }
    stat += (seen - expected) * (seen - expected) / expected;
    ++cells;
  }
  if (pooled_expected > 0.0) {
    stat += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) /
            pooled_expected;
    ++cells;
  }
  if (cells < 2) throw InputError("chi_square: fewer than two usable cells");
  const double dof = cells - 1;
  return regularized_gamma_q(0.5 * dof, 0.5 * stat);
}

}  // namespace dfm
