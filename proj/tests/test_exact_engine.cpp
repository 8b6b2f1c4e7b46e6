#include <doctest.h>

#include <cmath>
#include <memory>

#include "dfm/exact_engine.hpp"
#include "dfm/rng.hpp"
#include "oracles.hpp"

using namespace dfm;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const double x : values) v[i++] = x;
  return v;
}

ScoreEngine make_engine(DynamicsKind kind, int m, int d, const Eigen::VectorXd& mu0,
                        const Eigen::VectorXd& mu1) {
  const LatticeSpec spec(m, d);
  const Dynamics dyn(kind, spec);
  return ScoreEngine(reweight(Coupling::independent(spec, mu0, mu1), dyn));
}

Eigen::VectorXd seeded_simplex(int size, std::uint64_t seed) {
  RngStream rng(seed, 0);
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v[i] = 0.05 + rng.next_double();
  return v / v.sum();
}

}  // namespace

TEST_CASE("interpolant marginal hits both endpoints exactly") {
  for (const DynamicsKind kind : {DynamicsKind::kNearestNeighbor, DynamicsKind::kUniform}) {
    const Eigen::VectorXd mu0 = seeded_simplex(9, 11);
    const Eigen::VectorXd mu1 = seeded_simplex(9, 12);
    const ScoreEngine engine = make_engine(kind, 3, 2, mu0, mu1);
    CHECK((engine.marginal(0.0).probs - mu0).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((engine.marginal(1.0).probs - mu1).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("point-coupling marginal matches the conditioned bridge oracle") {
  const LatticeSpec spec(2, 1);
  const Dynamics dyn(DynamicsKind::kUniform, spec);
  const Coupling point = Coupling::independent(spec, vec({1.0, 0.0}), vec({0.0, 1.0}));
  const ScoreEngine engine(reweight(point, dyn));

  const Eigen::VectorXd got = engine.marginal(0.5).probs;
  const Eigen::VectorXd want = oracle::point_bridge_marginal(dyn, 0, 1, 0.5);
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-9);

  // cross-check: forward evolution under the projected generator
  const auto generator = [&engine](double t) { return engine.projected_generator(t); };
  const MarginalDist evolved = forward_evolve(engine.marginal(0.0), generator, 0.0, 0.5);
  CHECK((evolved.probs - want).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("bridge score closed forms for the uniform walk") {
  const LatticeSpec spec(5, 2);
  const Dynamics dyn(DynamicsKind::kUniform, spec);
  const ScoreEngine engine(
      reweight(Coupling::independent(spec, seeded_simplex(25, 3), seeded_simplex(25, 4)), dyn));
  const double t = 0.4;
  const double alpha = urw_alpha(1.0 - t, 5);

  const StateIndex x = encode(std::vector<int>{1, 2}, spec);
  const StateIndex y = apply_jump(x, {DynamicsKind::kUniform, 0, 2}, spec);  // axis 0: 1 -> 3
  // x1 differs from both x and y on that axis: Hamming difference 0
  const StateIndex x1_far = encode(std::vector<int>{0, 4}, spec);
  CHECK(engine.bridge_score(t, x1_far, x, y) == doctest::Approx(1.0).epsilon(1e-14));
  // x1 agrees with y on the jump axis: one fewer mismatch
  const StateIndex x1_hit = encode(std::vector<int>{3, 0}, spec);
  CHECK(engine.bridge_score(t, x1_hit, x, y) == doctest::Approx(1.0 / alpha).epsilon(1e-14));
  // x1 agrees with x on the jump axis: one more mismatch
  const StateIndex x1_leave = encode(std::vector<int>{1, 0}, spec);
  CHECK(engine.bridge_score(t, x1_leave, x, y) == doctest::Approx(alpha).epsilon(1e-14));
}

TEST_CASE("nearest-neighbor bridge score against the dense ODE kernel ratio") {
  const LatticeSpec spec(5, 1);
  const Dynamics dyn(DynamicsKind::kNearestNeighbor, spec);
  const ScoreEngine engine(
      reweight(Coupling::independent(spec, seeded_simplex(5, 5), seeded_simplex(5, 6)), dyn));
  const double t = 0.5;
  const Eigen::MatrixXd k_rest = oracle::ode_kernel(dyn, 1.0 - t);
  for (StateIndex x1 = 0; x1 < 5; ++x1) {
    for (StateIndex x = 0; x < 5; ++x) {
      const StateIndex y = apply_jump(x, {DynamicsKind::kNearestNeighbor, 0, +1}, spec);
      const double want = k_rest(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x1)) /
                          k_rest(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x1));
      CHECK(std::abs(engine.bridge_score(t, x1, x, y) - want) <= 1e-8);
    }
  }
}

TEST_CASE("bridge score is transitive; the projected score is not") {
  const Eigen::VectorXd mu0 = seeded_simplex(3, 21);
  const Eigen::VectorXd mu1 = seeded_simplex(3, 22);
  const ScoreEngine engine = make_engine(DynamicsKind::kUniform, 3, 1, mu0, mu1);
  RngStream rng(7, 0);
  for (int i = 0; i < 100; ++i) {
    const double t = 0.05 + 0.9 * rng.next_double();
    const StateIndex x1 = static_cast<StateIndex>(rng.next_double() * 3) % 3;
    const double lhs = engine.bridge_score(t, x1, 0, 1) * engine.bridge_score(t, x1, 1, 2);
    CHECK(std::abs(lhs - engine.bridge_score(t, x1, 0, 2)) <= 1e-12);
  }
  double worst = 0.0;
  for (StateIndex x = 0; x < 3; ++x) {
    for (StateIndex y = 0; y < 3; ++y) {
      for (StateIndex z = 0; z < 3; ++z) {
        if (x == y || y == z) continue;
        const double gap =
            std::abs(engine.score(0.5, x, y) * engine.score(0.5, y, z) - engine.score(0.5, x, z));
        worst = std::max(worst, gap);
      }
    }
  }
  CHECK(worst > 1e-3);
}

TEST_CASE("projected score collapses onto the bridge score for point-mass targets") {
  const LatticeSpec spec(3, 1);
  const Dynamics dyn(DynamicsKind::kNearestNeighbor, spec);
  const Coupling c = Coupling::independent(spec, seeded_simplex(3, 31), vec({0.0, 0.0, 1.0}));
  const ScoreEngine engine(reweight(c, dyn));
  const StateIndex target = 2;
  for (const double t : {0.2, 0.6, 0.9}) {
    for (StateIndex x = 0; x < 3; ++x) {
      for (const JumpOp& op : engine.jumps().ops()) {
        const StateIndex y = apply_jump(x, op, spec);
        CHECK(std::abs(engine.score(t, x, y) - engine.bridge_score(t, target, x, y)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("projected score equals the posterior average of bridge scores") {
  const LatticeSpec spec(2, 2);
  const Dynamics dyn(DynamicsKind::kNearestNeighbor, spec);
  const ReweightedCoupling rc =
      reweight(Coupling::independent(spec, seeded_simplex(4, 41), seeded_simplex(4, 42)), dyn);
  const ScoreEngine engine(rc);
  for (const double t : {0.25, 0.7}) {
    for (StateIndex x = 0; x < 4; ++x) {
      for (const JumpOp& op : engine.jumps().ops()) {
        const StateIndex y = apply_jump(x, op, spec);
        const double want = oracle::posterior_score(rc, t, x, y);
        CHECK(std::abs(engine.score(t, x, y) - want) <= 1e-9);
      }
    }
  }
}

TEST_CASE("explicit score bounds hold at grid times") {
  const double eta = 0.01;
  for (const DynamicsKind kind : {DynamicsKind::kNearestNeighbor, DynamicsKind::kUniform}) {
    const ScoreEngine engine =
        make_engine(kind, 3, 2, seeded_simplex(9, 51), seeded_simplex(9, 52));
    const int m = 3;
    for (const double t : {0.0, 0.25, 0.5, 0.75, 1.0 - eta}) {
      double lo_bound, hi_bound;
      if (kind == DynamicsKind::kNearestNeighbor) {
        lo_bound = (1.0 - t) / (5.0 * (2 * m + 1));
        hi_bound = 5.0 * (2 * m + 1) / (1.0 - t);
      } else {
        lo_bound = urw_alpha(1.0 - t, m);
        hi_bound = 1.0 / urw_alpha(1.0 - t, m);
      }
      for (StateIndex x = 0; x < 9; ++x) {
        double sum = 0.0;
        for (const JumpOp& op : engine.jumps().ops()) {
          const double u = engine.score(t, x, op);
          CHECK(u >= lo_bound - 1e-12);
          CHECK(u <= hi_bound + 1e-12);
          sum += u;
        }
        const double sum_bound = kind == DynamicsKind::kNearestNeighbor
                                     ? 10.0 * 2 * (2 * m + 1) / (1.0 - t)
                                     : 2 * ((std::exp(1.0) + m - 1) / (1.0 - t) + m - 1);
        CHECK(sum <= sum_bound + 1e-12);
      }
    }
  }
}

TEST_CASE("score domain errors") {
  const LatticeSpec spec(2, 1);
  const Dynamics dyn(DynamicsKind::kUniform, spec);
  const Coupling point = Coupling::independent(spec, vec({1.0, 0.0}), vec({0.0, 1.0}));
  const ScoreEngine engine(reweight(point, dyn));
  CHECK_THROWS_AS(engine.score(0.9995, 0, 1), TimeDomainError);
  CHECK_THROWS_AS(engine.bridge_score(1.0, 0, 0, 1), TimeDomainError);
  // state 1 has zero mass at t = 0 under the point prior
  CHECK_THROWS_AS(engine.score(0.0, 1, 0), UndefinedScoreError);
  CHECK_NOTHROW(engine.score(0.0, 0, 1));
}

TEST_CASE("projected generator structure") {
  const ScoreEngine engine =
      make_engine(DynamicsKind::kUniform, 3, 2, seeded_simplex(9, 61), seeded_simplex(9, 62));
  const Eigen::MatrixXd q = engine.projected_generator(0.4);
  CHECK(q.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
  for (Eigen::Index x = 0; x < 9; ++x) {
    for (Eigen::Index y = 0; y < 9; ++y) {
      if (x == y) continue;
      CHECK(q(x, y) >= 0.0);
      if (hamming(static_cast<StateIndex>(x), static_cast<StateIndex>(y), engine.spec()) != 1) {
        CHECK(q(x, y) == 0.0);  // off the jump neighborhood
      }
    }
  }
}

TEST_CASE("forward evolution under a zero generator is the identity") {
  const Eigen::VectorXd p0 = seeded_simplex(9, 71);
  const auto zero = [](double) { return Eigen::MatrixXd::Zero(9, 9).eval(); };
  const MarginalDist out = forward_evolve(MarginalDist(0.0, p0), zero, 0.0, 0.8);
  CHECK((out.probs - p0).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("forward evolution under the base generator reproduces kernel rows") {
  for (const DynamicsKind kind : {DynamicsKind::kNearestNeighbor, DynamicsKind::kUniform}) {
    const Dynamics dyn(kind, LatticeSpec(3, 2));
    const Eigen::MatrixXd q = generator_matrix(dyn);
    const auto constant = [&q](double) { return q; };
    Eigen::VectorXd start = Eigen::VectorXd::Zero(9);
    start[4] = 1.0;
    const MarginalDist out = forward_evolve(MarginalDist(0.0, start), constant, 0.0, 0.7);
    for (StateIndex y = 0; y < 9; ++y) {
      CHECK(std::abs(out.probs[static_cast<Eigen::Index>(y)] -
                     transition_prob(dyn, 0.7, 4, y)) <= 1e-8);
    }
  }
}

TEST_CASE("marginal preservation under the projected generator") {
  for (const DynamicsKind kind : {DynamicsKind::kNearestNeighbor, DynamicsKind::kUniform}) {
    const ScoreEngine engine =
        make_engine(kind, 2, 2, seeded_simplex(4, 81), seeded_simplex(4, 82));
    const auto generator = [&engine](double t) { return engine.projected_generator(t); };
    MarginalDist current = engine.marginal(0.0);
    for (const double target : {0.3, 0.6, 0.9}) {
      current = forward_evolve(current, generator, current.t, target);
      CHECK((current.probs - engine.marginal(target).probs).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("score ODE residual is tiny") {
  SUBCASE("urw m=2 d=1 random coupling") {
    const ScoreEngine engine =
        make_engine(DynamicsKind::kUniform, 2, 1, seeded_simplex(2, 91), seeded_simplex(2, 92));
    for (StateIndex x = 0; x < 2; ++x) {
      CHECK(engine.score_ode_residual(0.5, x, engine.jumps().ops()[0]) <= 1e-5);
    }
  }
  SUBCASE("nnrw m=3 d=2") {
    const ScoreEngine engine = make_engine(DynamicsKind::kNearestNeighbor, 3, 2,
                                           seeded_simplex(9, 93), seeded_simplex(9, 94));
    for (const JumpOp& op : engine.jumps().ops()) {
      CHECK(engine.score_ode_residual(0.3, 4, op) <= 1e-5);
    }
  }
}

TEST_CASE("evolution identities") {
  SUBCASE("empty interval is exactly zero") {
    const ScoreEngine engine =
        make_engine(DynamicsKind::kUniform, 2, 1, seeded_simplex(2, 95), seeded_simplex(2, 96));
    const auto [a, b] = engine.evolution_residuals(0.4, 0.4, engine.jumps().ops()[0]);
    CHECK(a == 0.0);
    CHECK(b == 0.0);
  }
  SUBCASE("urw m=2 d=1") {
    const ScoreEngine engine =
        make_engine(DynamicsKind::kUniform, 2, 1, seeded_simplex(2, 95), seeded_simplex(2, 96));
    const auto [a, b] = engine.evolution_residuals(0.2, 0.6, engine.jumps().ops()[0]);
    CHECK(a <= 1e-6);
    CHECK(b <= 1e-6);
  }
  SUBCASE("point-mass target and nnrw") {
    const LatticeSpec spec(2, 1);
    const Dynamics dyn(DynamicsKind::kNearestNeighbor, spec);
    const Coupling c = Coupling::independent(spec, seeded_simplex(2, 97), vec({0.0, 1.0}));
    const ScoreEngine engine(reweight(c, dyn));
    for (const JumpOp& op : engine.jumps().ops()) {
      const auto [a, b] = engine.evolution_residuals(0.1, 0.5, op);
      CHECK(a <= 1e-6);
      CHECK(b <= 1e-6);
    }
  }
}

TEST_CASE("numerator tables are cached and shared") {
  const ScoreEngine engine =
      make_engine(DynamicsKind::kUniform, 3, 1, seeded_simplex(3, 98), seeded_simplex(3, 99));
  CHECK(engine.numerators(0.3).get() == engine.numerators(0.3).get());
  CHECK(engine.numerators(0.3).get() != engine.numerators(0.31).get());
}
