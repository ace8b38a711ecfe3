#include "flipcoop/core.hpp"

#include <cmath>
#include <sstream>

namespace flipcoop {

SolverError::SolverError(std::string_view module, const std::string& what, int step)
    : std::runtime_error(std::string(module) + ": " + what), step_(step) {}

FlipDynState parse_flipdyn_state(std::string_view text) {
  if (text == "H") return FlipDynState::kHuman;
  if (text == "A") return FlipDynState::kAutonomous;
  throw DomainError("FlipDyn state must be \"H\" or \"A\", got \"" + std::string(text) +
                    "\"");
}

void check_probability(double p, std::string_view what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream os;
    os << what << " must lie in [0, 1], got " << p;
    throw DomainError(os.str());
  }
}

Horizon::Horizon(int steps) : steps_(steps) {
  if (steps < 1) throw DomainError("horizon must be >= 1, got " + std::to_string(steps));
}

IntentSchedule::IntentSchedule(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw DomainError("intent schedule is empty");
  for (std::size_t i = 0; i < p_.size(); ++i) {
    check_probability(p_[i], "intent p_" + std::to_string(i + 1));
  }
}

IntentSchedule IntentSchedule::constant(double p, Horizon horizon) {
  return IntentSchedule(std::vector<double>(static_cast<std::size_t>(horizon.steps()), p));
}

double IntentSchedule::at(int k) const {
  if (k < 1 || k > size()) {
    throw DomainError("intent index " + std::to_string(k) + " outside 1.." +
                      std::to_string(size()));
  }
  return p_[static_cast<std::size_t>(k - 1)];
}

BehavioralStrategy::BehavioralStrategy(std::vector<std::array<double, 2>> beta,
                                       std::vector<std::array<double, 2>> gamma)
    : beta_(std::move(beta)), gamma_(std::move(gamma)) {
  if (beta_.size() != gamma_.size()) {
    throw DomainError("behavioral strategy: beta and gamma lengths differ");
  }
  for (std::size_t k = 0; k < beta_.size(); ++k) {
    for (std::size_t s = 0; s < 2; ++s) {
      check_probability(beta_[k][s], "beta");
      check_probability(gamma_[k][s], "gamma");
    }
  }
}

BehavioralStrategy BehavioralStrategy::constant(Horizon horizon, std::array<double, 2> beta,
                                                std::array<double, 2> gamma) {
  const auto n = static_cast<std::size_t>(horizon.steps());
  return BehavioralStrategy(std::vector<std::array<double, 2>>(n, beta),
                            std::vector<std::array<double, 2>>(n, gamma));
}

double BehavioralStrategy::beta(int k, FlipDynState s) const {
  return beta_.at(static_cast<std::size_t>(k - 1))[index_of(s)];
}

double BehavioralStrategy::gamma(int k, FlipDynState s) const {
  return gamma_.at(static_cast<std::size_t>(k - 1))[index_of(s)];
}

namespace {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

// One 64-bit seed per (seed, stream) pair, mixed so nearby ids decorrelate.
RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : engine_(mix64(mix64(seed) ^ stream_id)) {}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

StateDistribution flipdyn_transition_dist(FlipDynState alpha, TakeoverAction action,
                                          double p) {
  check_probability(p, "intent probability");
  const auto point = [](FlipDynState s) {
    return s == FlipDynState::kHuman ? StateDistribution{1.0, 0.0}
                                     : StateDistribution{0.0, 1.0};
  };
  if (alpha == FlipDynState::kHuman) {
    // Only the joint switch hands authority to the autonomous agent.
    return point(action.human && action.autonomous ? FlipDynState::kAutonomous
                                                   : FlipDynState::kHuman);
  }
  if (!action.human) return point(FlipDynState::kAutonomous);
  if (action.autonomous) return point(FlipDynState::kHuman);
  return StateDistribution{p, 1.0 - p};
}

FlipDynState flipdyn_transition_sample(FlipDynState alpha, TakeoverAction action, double p,
                                       RandomStream& rng) {
  const StateDistribution d = flipdyn_transition_dist(alpha, action, p);
  if (d.human == 1.0) return FlipDynState::kHuman;
  if (d.autonomous == 1.0) return FlipDynState::kAutonomous;
  return rng.bernoulli(d.human) ? FlipDynState::kHuman : FlipDynState::kAutonomous;
}

}  // namespace flipcoop
