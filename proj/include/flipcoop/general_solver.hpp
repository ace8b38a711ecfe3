#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "flipcoop/core.hpp"
#include "flipcoop/matrix_game.hpp"

namespace flipcoop {

using StateId = std::size_t;

/// Tabular game over a finite state set. The control policies are already
/// folded into the two closed-loop successor maps.
class FiniteGameSpec {
 public:
  /// Successor tables are indexed [k-1][x]. Costs are tabulated on
  /// construction; any negative value or successor outside the state set is
  /// rejected here so the solvers never see a malformed game.
  FiniteGameSpec(std::size_t num_states, std::vector<std::vector<StateId>> step_h,
                 std::vector<std::vector<StateId>> step_a,
                 const StageCostEvaluators<StateId>& costs, IntentSchedule intent,
                 Horizon horizon);

  std::size_t num_states() const { return num_states_; }
  int steps() const { return horizon_.steps(); }
  const IntentSchedule& intent() const { return intent_; }

  StateId step_h(StateId x, int k) const { return step_h_[idx(k)][x]; }
  StateId step_a(StateId x, int k) const { return step_a_[idx(k)][x]; }
  StateId successor(StateId x, int k, FlipDynState next) const {
    return next == FlipDynState::kHuman ? step_h(x, k) : step_a(x, k);
  }

  double stage(StateId x, FlipDynState s, int k) const { return stage_[idx(k)][x][index_of(s)]; }
  double terminal(StateId x, FlipDynState s) const { return terminal_[x][index_of(s)]; }
  double human_takeover(StateId x, int k) const { return human_takeover_[idx(k)][x]; }
  double autonomous_takeover(StateId x, int k) const { return autonomous_takeover_[idx(k)][x]; }

 private:
  static std::size_t idx(int k) { return static_cast<std::size_t>(k - 1); }

  std::size_t num_states_;
  std::vector<std::vector<StateId>> step_h_;
  std::vector<std::vector<StateId>> step_a_;
  std::vector<std::vector<std::array<double, 2>>> stage_;
  std::vector<std::array<double, 2>> terminal_;
  std::vector<std::vector<double>> human_takeover_;
  std::vector<std::vector<double>> autonomous_takeover_;
  IntentSchedule intent_;
  Horizon horizon_;
};

/// v_H(k, x), v_A(k, x) for k = 1..L+1.
class ValueTables {
 public:
  ValueTables(int steps, std::size_t num_states);

  double& at(int k, StateId x, FlipDynState s) { return v_[idx(k)][x][index_of(s)]; }
  double at(int k, StateId x, FlipDynState s) const { return v_[idx(k)][x][index_of(s)]; }
  double v_h(int k, StateId x) const { return at(k, x, FlipDynState::kHuman); }
  double v_a(int k, StateId x) const { return at(k, x, FlipDynState::kAutonomous); }
  int steps() const { return static_cast<int>(v_.size()) - 1; }

 private:
  static std::size_t idx(int k) { return static_cast<std::size_t>(k - 1); }
  std::vector<std::vector<std::array<double, 2>>> v_;
};

/// Pure takeover decision per (k, x, alpha), k = 1..L.
class PolicyTables {
 public:
  PolicyTables(int steps, std::size_t num_states);

  StepBranch& branch(int k, StateId x, FlipDynState s) { return b_[idx(k)][x][index_of(s)]; }
  StepBranch branch(int k, StateId x, FlipDynState s) const {
    return b_[idx(k)][x][index_of(s)];
  }
  TakeoverAction action(int k, StateId x, FlipDynState s) const {
    return action_of(branch(k, x, s));
  }
  int steps() const { return static_cast<int>(b_.size()); }
  std::size_t num_states() const { return b_.empty() ? 0 : b_.front().size(); }

 private:
  static std::size_t idx(int k) { return static_cast<std::size_t>(k - 1); }
  std::vector<std::vector<std::array<StepBranch, 2>>> b_;
};

struct BackwardSolution {
  ValueTables values;
  PolicyTables policy;
};

BackwardSolution solve_backward(const FiniteGameSpec& spec,
                                SelectionRule rule = SelectionRule::kAdmissible);

struct OracleOptions {
  /// Drop the dominated (idle, request) pair at alpha = A.
  bool admissible_only = true;
  int max_steps = 4;
  std::size_t max_states = 8;
  std::size_t max_profiles = std::size_t{1} << 24;
};

/// Brute-force minimum of the expected cost over all pure Markov profiles on
/// the nodes reachable from (alpha_1, x_1). Independent of solve_backward:
/// each profile is scored by summing the cost over every chance branch.
double enumerate_oracle(const FiniteGameSpec& spec, FlipDynState alpha1, StateId x1,
                        const OracleOptions& options = {});

/// State-dependent behavioral strategy over a finite game, indexed
/// [k-1][x][alpha].
struct FiniteStrategy {
  std::vector<std::vector<std::array<double, 2>>> beta;
  std::vector<std::vector<std::array<double, 2>>> gamma;

  static FiniteStrategy from_policy(const PolicyTables& policy);
  static FiniteStrategy from_behavioral(const BehavioralStrategy& s, std::size_t num_states);
};

/// Exact expected cost by forward propagation of the (x, alpha) distribution.
double expected_cost(const FiniteGameSpec& spec, const FiniteStrategy& strategy,
                     FlipDynState alpha1, StateId x1);

}  // namespace flipcoop
