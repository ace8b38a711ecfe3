#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flipcoop {

/// Raised for out-of-range probabilities, non-finite inputs and other
/// violations of a value type's invariants.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised by solvers; the message is prefixed with the module name.
class SolverError : public std::runtime_error {
 public:
  SolverError(std::string_view module, const std::string& what, int step = -1);
  int step() const { return step_; }

 private:
  int step_;
};

/// Which agent holds authority over the continuous dynamics.
enum class FlipDynState : std::uint8_t { kHuman = 0, kAutonomous = 1 };

inline constexpr std::array<FlipDynState, 2> kFlipDynStates = {
    FlipDynState::kHuman, FlipDynState::kAutonomous};

constexpr std::size_t index_of(FlipDynState s) { return static_cast<std::size_t>(s); }
constexpr char to_char(FlipDynState s) { return s == FlipDynState::kHuman ? 'H' : 'A'; }
FlipDynState parse_flipdyn_state(std::string_view text);

/// Joint takeover action: `human` is pi^H, `autonomous` is pi^A. 1 means
/// takeover / request to takeover, 0 means idle.
struct TakeoverAction {
  bool human = false;
  bool autonomous = false;

  friend bool operator==(const TakeoverAction&, const TakeoverAction&) = default;
};

inline constexpr std::array<TakeoverAction, 4> kAllActions = {
    TakeoverAction{false, false}, TakeoverAction{false, true},
    TakeoverAction{true, false}, TakeoverAction{true, true}};

/// Two-point distribution over the next authority state.
struct StateDistribution {
  double human = 0.0;
  double autonomous = 0.0;

  double operator[](FlipDynState s) const {
    return s == FlipDynState::kHuman ? human : autonomous;
  }
};

/// Decision horizon L >= 1; time indices run k = 1..L, values k = 1..L+1.
class Horizon {
 public:
  explicit Horizon(int steps);
  int steps() const { return steps_; }

  friend bool operator==(const Horizon&, const Horizon&) = default;

 private:
  int steps_;
};

/// Human intent probabilities p_k, validated on construction.
class IntentSchedule {
 public:
  explicit IntentSchedule(std::vector<double> p);
  static IntentSchedule constant(double p, Horizon horizon);

  /// 1-based time index.
  double at(int k) const;
  int size() const { return static_cast<int>(p_.size()); }
  const std::vector<double>& values() const { return p_; }

 private:
  std::vector<double> p_;
};

void check_probability(double p, std::string_view what);

/// Stage, terminal and takeover cost maps over some state representation.
template <class State>
struct StageCostEvaluators {
  std::function<double(const State&, FlipDynState, int)> stage;
  std::function<double(const State&, FlipDynState)> terminal;
  std::function<double(const State&, int)> human_takeover;
  std::function<double(const State&, int)> autonomous_takeover;
};

/// Per-(k, alpha) takeover probabilities beta (human) and gamma (autonomous).
class BehavioralStrategy {
 public:
  BehavioralStrategy() = default;
  /// Rows are k = 1..L; columns indexed by FlipDynState.
  BehavioralStrategy(std::vector<std::array<double, 2>> beta,
                     std::vector<std::array<double, 2>> gamma);
  static BehavioralStrategy constant(Horizon horizon, std::array<double, 2> beta,
                                     std::array<double, 2> gamma);

  double beta(int k, FlipDynState s) const;
  double gamma(int k, FlipDynState s) const;
  int steps() const { return static_cast<int>(beta_.size()); }

 private:
  std::vector<std::array<double, 2>> beta_;
  std::vector<std::array<double, 2>> gamma_;
};

/// Deterministic random stream derived from (seed, stream id). Streams with
/// different ids are statistically independent; no global state.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Exact next-state distribution of the FlipDyn update rules.
StateDistribution flipdyn_transition_dist(FlipDynState alpha, TakeoverAction action,
                                          double p);

FlipDynState flipdyn_transition_sample(FlipDynState alpha, TakeoverAction action,
                                       double p, RandomStream& rng);

}  // namespace flipcoop
