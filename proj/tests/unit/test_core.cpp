#include <cmath>

#include <doctest.h>

#include "flipcoop/core.hpp"

using namespace flipcoop;

namespace {
constexpr FlipDynState H = FlipDynState::kHuman;
constexpr FlipDynState A = FlipDynState::kAutonomous;
}  // namespace

TEST_SUITE("core") {

TEST_CASE("transition distribution examples") {
  const StateDistribution a = flipdyn_transition_dist(H, {false, true}, 0.7);
  CHECK(a.human == 1.0);
  CHECK(a.autonomous == 0.0);
  const StateDistribution b = flipdyn_transition_dist(A, {true, false}, 1.0);
  CHECK(b.human == 1.0);
  const StateDistribution c = flipdyn_transition_dist(A, {true, false}, 0.4);
  CHECK(c.human == 0.4);
  CHECK(c.autonomous == 0.6);
}

TEST_CASE("every case is a distribution; only alpha=A with {1,0} is random") {
  for (double p : {0.0, 0.1, 0.4, 0.5, 0.9, 1.0}) {
    for (FlipDynState alpha : kFlipDynStates) {
      for (const TakeoverAction& act : kAllActions) {
        const StateDistribution d = flipdyn_transition_dist(alpha, act, p);
        CHECK(d.human >= 0.0);
        CHECK(d.autonomous >= 0.0);
        CHECK(d.human + d.autonomous == 1.0);
        const bool random = alpha == A && act.human && !act.autonomous;
        if (!random) CHECK((d.human == 1.0 || d.autonomous == 1.0));
      }
    }
  }
}

TEST_CASE("transition table") {
  CHECK(flipdyn_transition_dist(H, {false, false}, 0.3).human == 1.0);
  CHECK(flipdyn_transition_dist(H, {true, false}, 0.3).human == 1.0);
  CHECK(flipdyn_transition_dist(H, {true, true}, 0.3).autonomous == 1.0);
  CHECK(flipdyn_transition_dist(A, {false, false}, 0.3).autonomous == 1.0);
  CHECK(flipdyn_transition_dist(A, {false, true}, 0.3).autonomous == 1.0);
  CHECK(flipdyn_transition_dist(A, {true, true}, 0.3).human == 1.0);
}

TEST_CASE("probability outside [0,1] is a domain error") {
  CHECK_THROWS_AS(flipdyn_transition_dist(A, {true, false}, 1.5), DomainError);
  CHECK_THROWS_AS(flipdyn_transition_dist(H, {false, false}, -0.1), DomainError);
  CHECK_THROWS_AS(flipdyn_transition_dist(H, {false, false}, std::nan("")), DomainError);
  RandomStream rng(1, 0);
  CHECK_THROWS_AS(flipdyn_transition_sample(A, {true, false}, 2.0, rng), DomainError);
}

TEST_CASE("sampling examples") {
  for (std::uint64_t seed : {0ULL, 7ULL, 123456789ULL}) {
    RandomStream rng(seed, 3);
    CHECK(flipdyn_transition_sample(A, {false, false}, 0.5, rng) == A);
    CHECK(flipdyn_transition_sample(H, {true, true}, 0.5, rng) == A);
  }
  RandomStream r1(42, 0);
  RandomStream r2(42, 0);
  for (int i = 0; i < 100; ++i) {
    CHECK(flipdyn_transition_sample(A, {true, false}, 0.4, r1) ==
          flipdyn_transition_sample(A, {true, false}, 0.4, r2));
  }
}

TEST_CASE("stream ids give different sequences") {
  RandomStream a(5, 0);
  RandomStream b(5, 1);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.uniform() == b.uniform();
  CHECK(same < 4);
}

TEST_CASE("uniform lies in [0,1)") {
  RandomStream rng(9, 9);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("empirical frequency of the stochastic branch") {
  const int n = 100000;
  for (double p : {0.1, 0.4, 0.55, 0.9}) {
    RandomStream rng(2024, static_cast<std::uint64_t>(p * 1000));
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += flipdyn_transition_sample(A, {true, false}, p, rng) == H;
    CHECK(std::abs(hits / static_cast<double>(n) - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("value types validate eagerly") {
  CHECK_THROWS_AS(Horizon(0), DomainError);
  CHECK_THROWS_AS(IntentSchedule({0.2, 1.1}), DomainError);
  CHECK_THROWS_AS(IntentSchedule(std::vector<double>{}), DomainError);
  const IntentSchedule s = IntentSchedule::constant(0.3, Horizon(4));
  CHECK(s.size() == 4);
  CHECK(s.at(4) == 0.3);
  CHECK_THROWS_AS(s.at(0), DomainError);
  CHECK_THROWS_AS(s.at(5), DomainError);
  CHECK_THROWS_AS(BehavioralStrategy::constant(Horizon(2), {0.5, 1.2}, {0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(BehavioralStrategy({{0.0, 0.0}}, {}), DomainError);
  const BehavioralStrategy b = BehavioralStrategy::constant(Horizon(2), {0.25, 0.75}, {1.0, 0.0});
  CHECK(b.beta(2, A) == 0.75);
  CHECK(b.gamma(1, H) == 1.0);
  CHECK(parse_flipdyn_state("H") == H);
  CHECK_THROWS_AS(parse_flipdyn_state("X"), DomainError);
}

}
