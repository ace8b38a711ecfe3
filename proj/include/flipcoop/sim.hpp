#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "flipcoop/general_solver.hpp"
#include "flipcoop/lq_solver.hpp"
#include "flipcoop/potential_solver.hpp"

namespace flipcoop {

/// Ask for finite-horizon LQR gains instead of supplying them.
struct GainSynthesis {
  Matrix human_effort;
  Matrix autonomous_effort;
};

using GainSource = std::variant<FeedbackGains, GainSynthesis>;
using CostSource = std::variant<QuadraticCostSchedule, AgentCostSchedules>;

struct Scenario {
  std::string label;
  LinearSystem system;
  GainSource gains;
  CostSource costs;
  IntentSchedule intent;
  Horizon horizon;
  Vector x1;
  FlipDynState alpha1 = FlipDynState::kAutonomous;

  bool has_agent_costs() const { return std::holds_alternative<AgentCostSchedules>(costs); }
  /// The schedule rollouts are scored against. With per-agent schedules this
  /// is the human agent's.
  const QuadraticCostSchedule& scoring_costs() const;
  const AgentCostSchedules& agent_costs() const;
  FeedbackGains resolved_gains() const;
  ClosedLoopPair closed_loops() const;
  void validate() const;
};

struct LqPolicy {
  RiccatiPair pair;
  SelectionRule rule = SelectionRule::kAdmissible;
};

struct PotentialPolicy {
  QTables tables;
};

/// Tabular policy over a discretization; `locate` maps (x, k) to a state id.
struct TabularPolicy {
  PolicyTables tables;
  std::function<StateId(const Vector&, int)> locate;
};

using PolicySource = std::variant<LqPolicy, PotentialPolicy, TabularPolicy, BehavioralStrategy>;

struct Rollout {
  std::vector<Vector> states;           // x_1..x_{L+1}, shorter when diverged
  std::vector<FlipDynState> alphas;     // alpha_1..alpha_{L+1}
  std::vector<TakeoverAction> actions;  // k = 1..L
  double realized_cost = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool diverged = false;
};

/// Norm above which a rollout is cut short.
inline constexpr double kDivergenceNorm = 1e12;

Rollout rollout(const Scenario& scenario, const PolicySource& policy, std::uint64_t seed,
                std::uint64_t stream = 0);

/// Stage, takeover and terminal cost recomputed from a rollout's sequences.
double recompute_cost(const Scenario& scenario, const Rollout& r);

struct RolloutStats {
  std::size_t n = 0;
  std::size_t n_divergent = 0;
  double mean_cost = 0.0;
  double std_error = 0.0;
  /// Fraction of rollouts with alpha_k = H, k = 1..L+1.
  std::vector<double> alpha_occupancy;
  /// Rollouts cut short at step k, k = 1..L.
  std::vector<std::size_t> divergent_at;
};

/// n rollouts on substreams (root_seed, i). `threads` = 0 picks the default
/// worker count (hardware concurrency, capped by FLIPCOOP_THREADS).
RolloutStats monte_carlo(const Scenario& scenario, const PolicySource& policy, std::size_t n,
                         std::uint64_t root_seed, unsigned threads = 0);

unsigned default_worker_count();

/// Exact expectation by forward propagation of (x, alpha) atoms. Atoms with
/// identical state and authority are merged; throws past `max_atoms`.
double forward_expected_cost(const Scenario& scenario, const PolicySource& policy,
                             std::size_t max_atoms = std::size_t{1} << 20);

/// Expected cost of a state-independent behavioral strategy, evaluated as a
/// backward quadratic recursion.
double behavioral_expected_cost(const Scenario& scenario, const BehavioralStrategy& strategy);

/// Solve the scenario with the solver matching its cost source.
PolicySource solve_scenario(const Scenario& scenario, SelectionRule rule = SelectionRule::kAdmissible,
                            const PotentialOptions& options = {});

Scenario scalar_lti_scenario(double p);

enum class VehicleCase : std::uint8_t { kA, kB };

VehicleCase parse_vehicle_case(std::string_view text);
std::string_view to_string(VehicleCase c);

/// Tracking-error model: cross-track error and heading error.
Scenario vehicle_tracking_scenario(VehicleCase c,
                                   const std::map<std::string, double>& overrides = {});

/// Names accepted by vehicle_tracking_scenario overrides.
std::vector<std::string> vehicle_override_keys();

/// Equal-weight per-agent scenario with matching takeover weights, so the
/// potential exists at every step.
Scenario potential_aligned_scenario();
/// Per-agent scenario whose value gaps drift apart; the existence check fails.
Scenario potential_misaligned_scenario();

/// Nearest-point grid discretization of a scalar scenario for the general
/// solver. Grid points span [-extent, extent].
struct Discretization {
  std::vector<double> grid;
  FiniteGameSpec spec;
  StateId locate(double x) const;
};

Discretization discretize_scalar(const Scenario& scenario, std::size_t points, double extent);

}  // namespace flipcoop
