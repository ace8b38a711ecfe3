#pragma once

#include <optional>
#include <vector>

#include "flipcoop/lq_solver.hpp"
#include "flipcoop/matrix_game.hpp"

namespace flipcoop {

/// Agent tag for the per-agent objectives: kHuman is H-dagger, kAutonomous
/// is A-dagger.
enum class Agent : std::uint8_t { kHuman = 0, kAutonomous = 1 };

std::string_view to_string(Agent agent);

/// One cost schedule per agent. Each agent's schedule carries its own stage
/// matrices for both authority states and its own takeover weights.
struct AgentCostSchedules {
  QuadraticCostSchedule human;
  QuadraticCostSchedule autonomous;

  const QuadraticCostSchedule& of(Agent agent) const {
    return agent == Agent::kHuman ? human : autonomous;
  }
  int steps() const { return human.steps(); }
  void validate(Eigen::Index n) const;
};

/// Scalar ingredients of one agent's 2x2 continuation matrix.
struct AgentTerms {
  double v_h_next = 0.0;
  double v_a_next = 0.0;
  double h = 0.0;
  double a = 0.0;
};

struct BimatrixPair {
  CostToGoMatrix human;
  CostToGoMatrix autonomous;
  /// Authority state the pair was built at. At alpha = A both alternating
  /// sums vanish identically, so the residual is 0 without rounding noise.
  FlipDynState alpha = FlipDynState::kHuman;
};

/// Per-agent continuation matrices with the intent fixed at p = 1.
BimatrixPair build_bimatrix(FlipDynState alpha, const AgentTerms& hdag, const AgentTerms& adag);

/// M11 - M12 - M21 + M22.
double alternating_sum(const CostToGoMatrix& m);
double existence_residual(const BimatrixPair& pair);
/// 1e-9 * max(1, largest |entry|).
double default_existence_tolerance(const BimatrixPair& pair);
bool check_exact_potential(const BimatrixPair& pair, double tol);

/// Candidate potential normalized to Psi22 = 0. Refuses with the residual
/// when the existence check fails (default tolerance if none is given).
CostToGoMatrix build_potential(FlipDynState alpha, const AgentTerms& hdag,
                               const AgentTerms& adag, std::optional<double> tol = {});

/// Minimizer of the potential over the admissible pairs: Psi11 < 0 keeps
/// idle at alpha = H, Psi11 < Psi21 keeps idle at alpha = A. Ties switch.
StepBranch select_from_potential(FlipDynState alpha, const CostToGoMatrix& psi);

enum class ExistenceMode : std::uint8_t {
  kStrict,  // throw at the first violating step
  kRecord,  // store the residual and keep going
};

struct PotentialOptions {
  ExistenceMode existence = ExistenceMode::kStrict;
  double relative_tolerance = 1e-9;
};

/// Q^{alpha, agent}_k for k = 1..L+1 plus the branch and warnings per k.
struct QTables {
  std::vector<Matrix> Q_H_hdag;
  std::vector<Matrix> Q_A_hdag;
  std::vector<Matrix> Q_H_adag;
  std::vector<Matrix> Q_A_adag;
  std::vector<StepBranch> branch_H;
  std::vector<StepBranch> branch_A;
  std::vector<BranchWarning> warnings;
  /// Max-abs entry of the alpha = H existence residual matrix at each k.
  std::vector<double> existence_residual;
  /// True where the residual exceeded the tolerance (record mode only).
  std::vector<bool> existence_violated;

  int steps() const { return static_cast<int>(branch_H.size()); }
  const Matrix& value(FlipDynState s, Agent agent, int k) const;
  StepBranch branch(FlipDynState s, int k) const {
    return (s == FlipDynState::kHuman ? branch_H : branch_A).at(static_cast<std::size_t>(k - 1));
  }
};

QTables solve_potential_recursion(const ClosedLoopPair& loops, const AgentCostSchedules& costs,
                                  Horizon horizon, const PotentialOptions& options = {});

/// Potential-minimizing takeover pair at (x, k, alpha); x = 0 is idle.
TakeoverAction potential_policy_at_state(const Vector& x, int k, const QTables& q,
                                         const ClosedLoopPair& loops,
                                         const AgentCostSchedules& costs, FlipDynState alpha);

}  // namespace flipcoop
