#include <cmath>

#include <doctest.h>

#include "flipcoop/sim.hpp"

using namespace flipcoop;

namespace {

constexpr FlipDynState H = FlipDynState::kHuman;
constexpr FlipDynState A = FlipDynState::kAutonomous;

Matrix s(double v) { return Matrix::Constant(1, 1, v); }

bool same_rollout(const Rollout& a, const Rollout& b) {
  if (a.states.size() != b.states.size() || a.alphas != b.alphas ||
      a.actions.size() != b.actions.size() || a.diverged != b.diverged) {
    return false;
  }
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    if (a.states[i] != b.states[i]) return false;
  }
  for (std::size_t i = 0; i < a.actions.size(); ++i) {
    if (!(a.actions[i] == b.actions[i])) return false;
  }
  return a.realized_cost == b.realized_cost;
}

Scenario with_intent(Scenario sc, std::vector<double> p) {
  sc.intent = IntentSchedule(std::move(p));
  return sc;
}

Scenario unstable_scenario() {
  const Horizon hz(30);
  return Scenario{"unstable",
                  LinearSystem::time_invariant(s(10), s(0), s(0), hz),
                  FeedbackGains{std::vector<Matrix>(30, s(0)), std::vector<Matrix>(30, s(0))},
                  QuadraticCostSchedule::time_invariant(s(1), s(1), s(1), s(1), hz),
                  IntentSchedule::constant(0.5, hz),
                  hz,
                  Vector::Constant(1, 1.0),
                  A};
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("scalar scenario presets") {
  for (double p : {0.4, 0.55, 0.7}) {
    const Scenario sc = scalar_lti_scenario(p);
    const ClosedLoopPair loops = sc.closed_loops();
    CHECK(sc.horizon.steps() == 30);
    CHECK(loops.human(1)(0, 0) == doctest::Approx(0.91).epsilon(1e-15));
    CHECK(loops.autonomous(30)(0, 0) == doctest::Approx(0.94).epsilon(1e-15));
    CHECK(sc.intent.at(17) == p);
    CHECK(sc.alpha1 == A);
  }
  CHECK_THROWS_AS(scalar_lti_scenario(1.2), DomainError);
}

TEST_CASE("p = 0 with an idle human stays autonomous") {
  const Scenario sc = scalar_lti_scenario(0.0);
  const BehavioralStrategy idle = BehavioralStrategy::constant(sc.horizon, {0, 0}, {0, 0});
  const Rollout r = rollout(sc, idle, 3);
  double want = 0.0, x = 1.0;
  for (int k = 1; k <= 30; ++k) {
    want += 1.0 * x * x;
    x *= 0.94;
  }
  want += 1.0 * x * x;
  for (FlipDynState a : r.alphas) CHECK(a == A);
  CHECK(r.realized_cost == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("rollouts are deterministic and self-consistent") {
  std::vector<std::pair<Scenario, PolicySource>> cases;
  for (double p : {0.4, 0.55, 0.7}) {
    const Scenario sc = scalar_lti_scenario(p);
    cases.emplace_back(sc, solve_scenario(sc));
    cases.emplace_back(sc, BehavioralStrategy::constant(sc.horizon, {0.3, 0.6}, {0.5, 0.2}));
  }
  for (VehicleCase c : {VehicleCase::kA, VehicleCase::kB}) {
    const Scenario sc = vehicle_tracking_scenario(c);
    cases.emplace_back(sc, solve_scenario(sc));
  }
  const Scenario pot = potential_aligned_scenario();
  cases.emplace_back(pot, solve_scenario(pot));
  for (const auto& [sc, policy] : cases) {
    CAPTURE(sc.label);
    for (std::uint64_t seed : {0ULL, 7ULL, 991ULL}) {
      const Rollout a = rollout(sc, policy, seed);
      const Rollout b = rollout(sc, policy, seed);
      CHECK(same_rollout(a, b));
      CHECK(a.states.size() == static_cast<std::size_t>(sc.horizon.steps() + 1));
      CHECK(a.alphas.front() == sc.alpha1);
      CHECK(std::abs(recompute_cost(sc, a) - a.realized_cost) <= 1e-10);
    }
  }
}

TEST_CASE("single rollout statistics") {
  const Scenario sc = scalar_lti_scenario(0.7);
  const PolicySource policy = solve_scenario(sc);
  const RolloutStats st = monte_carlo(sc, policy, 1, 5, 1);
  CHECK(st.n == 1);
  CHECK(st.mean_cost == rollout(sc, policy, 5, 0).realized_cost);
}

TEST_CASE("deterministic scenarios have zero standard error") {
  for (double p : {0.0, 1.0}) {
    const Scenario sc = scalar_lti_scenario(p);
    const RolloutStats st =
        monte_carlo(sc, BehavioralStrategy::constant(sc.horizon, {1, 1}, {0, 0}), 50, 1);
    CHECK(st.std_error == 0.0);
  }
}

TEST_CASE("monte carlo does not depend on the worker count") {
  const Scenario sc = scalar_lti_scenario(0.55);
  const PolicySource policy = BehavioralStrategy::constant(sc.horizon, {0.2, 0.7}, {0.4, 0.1});
  const RolloutStats one = monte_carlo(sc, policy, 2000, 17, 1);
  for (unsigned t : {2u, 3u, 8u}) {
    const RolloutStats many = monte_carlo(sc, policy, 2000, 17, t);
    CHECK(many.mean_cost == one.mean_cost);
    CHECK(many.std_error == one.std_error);
    CHECK(many.alpha_occupancy == one.alpha_occupancy);
  }
}

TEST_CASE("NE expectation matches the recursion value") {
  for (double p : {0.4, 0.55, 0.7}) {
    const Scenario sc = scalar_lti_scenario(p);
    const PolicySource policy = solve_scenario(sc);
    const double v = std::get<LqPolicy>(policy).pair.value(sc.alpha1, 1)(0, 0);
    CHECK(forward_expected_cost(sc, policy) == doctest::Approx(v).epsilon(1e-12));
  }
}

TEST_CASE("behavioral expectation, forward propagation and sampling agree") {
  const Scenario sc = scalar_lti_scenario(0.55);
  const BehavioralStrategy b = BehavioralStrategy::constant(sc.horizon, {0.25, 0.5}, {0.5, 0.25});
  const double exact = behavioral_expected_cost(sc, b);
  CHECK(forward_expected_cost(sc, b) == doctest::Approx(exact).epsilon(1e-12));
  const RolloutStats st = monte_carlo(sc, b, 100000, 2);
  CHECK(std::abs(st.mean_cost - exact) <= 3 * st.std_error);
}

TEST_CASE("monte carlo covers the exact expectation") {
  // The NE policy is deterministic on this instance, so mix the actions.
  const Scenario sc = scalar_lti_scenario(0.55);
  const PolicySource policy = BehavioralStrategy::constant(sc.horizon, {0.25, 0.5}, {0.5, 0.25});
  const double exact = forward_expected_cost(sc, policy);
  int covered = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const RolloutStats st = monte_carlo(sc, policy, 10000, 1000 + rep);
    REQUIRE(st.std_error > 0.0);
    covered += std::abs(st.mean_cost - exact) <= 3 * st.std_error;
  }
  CHECK(covered >= 99);
}

TEST_CASE("authority occupancy follows the intent schedule") {
  const std::vector<double> p = {0.1, 0.3, 0.6, 0.9, 0.2};
  Scenario sc = with_intent(scalar_lti_scenario(0.5), std::vector<double>(30, 0.5));
  std::vector<double> q = p;
  q.resize(30, 0.5);
  sc = with_intent(sc, q);
  // Always attempt the takeover at alpha = A, never leave alpha = H.
  const BehavioralStrategy b = BehavioralStrategy::constant(sc.horizon, {0, 1}, {0, 0});
  const std::size_t n = 20000;
  const RolloutStats st = monte_carlo(sc, b, n, 44);
  CHECK(st.alpha_occupancy.size() == 31);
  CHECK(st.alpha_occupancy[0] == 0.0);
  double stay = 1.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    stay *= 1.0 - p[k];
    const double want = 1.0 - stay;
    CHECK(std::abs(st.alpha_occupancy[k + 1] - want) <= 4 * std::sqrt(want * (1 - want) / n));
  }
  // One step from alpha = A: the hit rate is p_1 itself.
  CHECK(std::abs(st.alpha_occupancy[1] - p[0]) <= 4 * std::sqrt(p[0] * (1 - p[0]) / n));
}

TEST_CASE("idle autonomous policy keeps zero human occupancy") {
  const Scenario sc = scalar_lti_scenario(0.4);
  const BehavioralStrategy b = BehavioralStrategy::constant(sc.horizon, {0, 0}, {0, 0});
  const RolloutStats st = monte_carlo(sc, b, 100, 1);
  for (double o : st.alpha_occupancy) CHECK(o == 0.0);
}

TEST_CASE("divergent rollouts are truncated and counted") {
  const Scenario sc = unstable_scenario();
  const PolicySource idle = BehavioralStrategy::constant(sc.horizon, {0, 0}, {0, 0});
  const Rollout r = rollout(sc, idle, 0);
  CHECK(r.diverged);
  CHECK(r.states.size() < 31);
  CHECK(std::abs(recompute_cost(sc, r) - r.realized_cost) <= 1e-10 * r.realized_cost);
  const RolloutStats st = monte_carlo(sc, idle, 10, 0);
  CHECK(st.n_divergent == 10);
  std::size_t total = 0;
  for (std::size_t c : st.divergent_at) total += c;
  CHECK(total == 10);
}

TEST_CASE("vehicle case a: the human keeps the first straight, requests arrive on the arc") {
  const Scenario sc = vehicle_tracking_scenario(VehicleCase::kA);
  CHECK(sc.horizon.steps() == 60);
  CHECK(sc.alpha1 == A);
  const PolicySource policy = solve_scenario(sc);
  const RiccatiPair& pair = std::get<LqPolicy>(policy).pair;
  for (int k = 1; k <= 20; ++k) CHECK(pair.branch(H, k) == StepBranch::kIdleIdle);
  bool request = false;
  for (int k = 21; k <= 40; ++k) request = request || pair.branch(H, k) == StepBranch::kJointSwitch;
  CHECK(request);
  CHECK(pair.branch(H, 60) == StepBranch::kIdleIdle);
  // Human stage costs dominate the autonomous ones throughout.
  const QuadraticCostSchedule& c = sc.scoring_costs();
  for (int k = 1; k <= 60; ++k) CHECK(strictly_below(c.stage(A, k), c.stage(H, k)).below);
}

TEST_CASE("vehicle case b: the human takes over at once and keeps control") {
  const Scenario sc = vehicle_tracking_scenario(VehicleCase::kB);
  const PolicySource policy = solve_scenario(sc);
  CHECK(std::get<LqPolicy>(policy).pair.branch(A, 1) != StepBranch::kIdleIdle);
  const RolloutStats st = monte_carlo(sc, policy, 200, 3);
  double h = 0.0;
  for (double o : st.alpha_occupancy) h += o;
  CHECK(h / static_cast<double>(st.alpha_occupancy.size()) >= 0.5);
}

TEST_CASE("free switching favors the better loop") {
  const Scenario sc =
      vehicle_tracking_scenario(VehicleCase::kA, {{"takeover_human", 0}, {"takeover_autonomous", 0}});
  const PolicySource policy = solve_scenario(sc);
  const RiccatiPair& pair = std::get<LqPolicy>(policy).pair;
  const ClosedLoopPair loops = sc.closed_loops();
  for (int k = 1; k <= 60; ++k) {
    const Matrix& Bt = loops.human(k);
    const Matrix& Ct = loops.autonomous(k);
    const Matrix vh = Bt.transpose() * pair.value(H, k + 1) * Bt;
    const Matrix va = Ct.transpose() * pair.value(A, k + 1) * Ct;
    if (strictly_below(vh, va).below && !strictly_below(vh, va).indefinite) {
      CHECK(pair.branch(A, k) != StepBranch::kIdleIdle);
    }
    if (strictly_below(va, vh).below && !strictly_below(va, vh).indefinite) {
      CHECK(pair.branch(H, k) == StepBranch::kJointSwitch);
    }
  }
}

TEST_CASE("vehicle overrides are validated") {
  CHECK_THROWS_AS(vehicle_tracking_scenario(VehicleCase::kA, {{"no_such_key", 1}}), DomainError);
  CHECK_THROWS_AS(vehicle_tracking_scenario(VehicleCase::kA, {{"cost_peak", -1}}), DomainError);
  CHECK_THROWS_AS(vehicle_tracking_scenario(VehicleCase::kA, {{"alpha1", 0.5}}), DomainError);
  CHECK_THROWS_AS(vehicle_tracking_scenario(VehicleCase::kA, {{"dt", 0}}), DomainError);
  CHECK_THROWS_AS(vehicle_tracking_scenario(VehicleCase::kA, {{"speed", std::nan("")}}), DomainError);
  CHECK_THROWS_AS(parse_vehicle_case("c"), DomainError);
  const Scenario sc = vehicle_tracking_scenario(VehicleCase::kB, {{"segment_2", 10}, {"alpha1", 0}});
  CHECK(sc.horizon.steps() == 50);
  CHECK(sc.alpha1 == H);
  CHECK(vehicle_override_keys().size() >= 10);
}

TEST_CASE("scalar discretization") {
  const Scenario sc = scalar_lti_scenario(0.4);
  const Discretization d = discretize_scalar(sc, 201, 2.0);
  CHECK(d.grid.size() == 201);
  CHECK(d.spec.num_states() == 201);
  CHECK(d.grid[d.locate(1.0)] == doctest::Approx(1.0));
  CHECK(d.locate(-9.0) == 0);
  CHECK(d.locate(9.0) == 200);
  const BackwardSolution sol = solve_backward(d.spec);
  TabularPolicy tab{sol.policy, [&d](const Vector& x, int) { return d.locate(x(0)); }};
  const Rollout r = rollout(sc, tab, 1);
  CHECK(std::abs(recompute_cost(sc, r) - r.realized_cost) <= 1e-10);
  CHECK_THROWS_AS(discretize_scalar(sc, 1, 2.0), SolverError);
  CHECK_THROWS_AS(discretize_scalar(vehicle_tracking_scenario(VehicleCase::kA), 11, 2.0), SolverError);
}

TEST_CASE("potential presets") {
  const Scenario sc = potential_aligned_scenario();
  CHECK(sc.has_agent_costs());
  const PolicySource policy = solve_scenario(sc);
  CHECK(std::holds_alternative<PotentialPolicy>(policy));
  CHECK_THROWS_AS(solve_scenario(potential_misaligned_scenario()), SolverError);
  CHECK_THROWS_AS(scalar_lti_scenario(0.4).agent_costs(), SolverError);
}

}
