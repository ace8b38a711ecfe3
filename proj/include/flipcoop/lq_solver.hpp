#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "flipcoop/core.hpp"
#include "flipcoop/matrix_game.hpp"

namespace flipcoop {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// x+ = E_k x + B_k u (human) or E_k x + C_k w (autonomous); per-k matrices,
/// index k-1.
struct LinearSystem {
  std::vector<Matrix> E;
  std::vector<Matrix> B;
  std::vector<Matrix> C;

  static LinearSystem time_invariant(const Matrix& E, const Matrix& B, const Matrix& C,
                                     Horizon horizon);
  int steps() const { return static_cast<int>(E.size()); }
  Eigen::Index state_dim() const { return E.empty() ? 0 : E.front().rows(); }
  void validate() const;
};

/// u_k = K_k x, w_k = W_k x.
struct FeedbackGains {
  std::vector<Matrix> K;
  std::vector<Matrix> W;
};

/// Btilde_k = E_k + B_k K_k, Ctilde_k = E_k + C_k W_k.
struct ClosedLoopPair {
  std::vector<Matrix> btilde;
  std::vector<Matrix> ctilde;

  int steps() const { return static_cast<int>(btilde.size()); }
  Eigen::Index state_dim() const { return btilde.empty() ? 0 : btilde.front().rows(); }
  const Matrix& human(int k) const { return btilde.at(static_cast<std::size_t>(k - 1)); }
  const Matrix& autonomous(int k) const { return ctilde.at(static_cast<std::size_t>(k - 1)); }
  const Matrix& under(FlipDynState s, int k) const {
    return s == FlipDynState::kHuman ? human(k) : autonomous(k);
  }
};

/// g_k(x, alpha) = x' G^alpha_k x, h_k = x' H_k x, a_k = x' A_k x.
struct QuadraticCostSchedule {
  std::vector<Matrix> G_H;
  std::vector<Matrix> G_A;
  std::vector<Matrix> H;
  std::vector<Matrix> A;
  Matrix G_H_terminal;
  Matrix G_A_terminal;

  static QuadraticCostSchedule time_invariant(const Matrix& G_H, const Matrix& G_A,
                                              const Matrix& H, const Matrix& A, Horizon horizon);
  int steps() const { return static_cast<int>(G_H.size()); }
  const Matrix& stage(FlipDynState s, int k) const {
    return (s == FlipDynState::kHuman ? G_H : G_A).at(static_cast<std::size_t>(k - 1));
  }
  const Matrix& terminal(FlipDynState s) const {
    return s == FlipDynState::kHuman ? G_H_terminal : G_A_terminal;
  }
  const Matrix& human_takeover(int k) const { return H.at(static_cast<std::size_t>(k - 1)); }
  const Matrix& autonomous_takeover(int k) const { return A.at(static_cast<std::size_t>(k - 1)); }

  /// Symmetric to 1e-12 and positive semidefinite, consistent dimensions.
  void validate(Eigen::Index n) const;
};

/// One per-step warning record of the matrix-order branch tests.
struct BranchWarning {
  bool indefinite_h = false;
  bool indefinite_a = false;

  bool any() const { return indefinite_h || indefinite_a; }
};

/// V^alpha_k(x) = x' P^alpha_k x for k = 1..L+1 together with the branch
/// taken by the a priori recursion at each k = 1..L.
struct RiccatiPair {
  std::vector<Matrix> P_H;
  std::vector<Matrix> P_A;
  std::vector<StepBranch> branch_H;
  std::vector<StepBranch> branch_A;
  std::vector<BranchWarning> warnings;

  int steps() const { return static_cast<int>(branch_H.size()); }
  const Matrix& value(FlipDynState s, int k) const {
    return (s == FlipDynState::kHuman ? P_H : P_A).at(static_cast<std::size_t>(k - 1));
  }
  StepBranch branch(FlipDynState s, int k) const {
    return (s == FlipDynState::kHuman ? branch_H : branch_A).at(static_cast<std::size_t>(k - 1));
  }
};

/// Result of "lhs strictly below rhs" in the Loewner order. When rhs - lhs
/// is neither positive definite nor negative semidefinite the answer falls
/// back to trace(rhs - lhs) > 0 and `indefinite` is set.
struct OrderTest {
  bool below = false;
  bool indefinite = false;
};

OrderTest strictly_below(const Matrix& lhs, const Matrix& rhs);

ClosedLoopPair close_loops(const LinearSystem& sys, const FeedbackGains& gains);

/// Finite-horizon discrete Riccati gains per agent: the human against the
/// G_H schedule through B, the autonomous agent against G_A through C.
FeedbackGains lqr_gains(const LinearSystem& sys, const QuadraticCostSchedule& costs,
                        const Matrix& human_effort, const Matrix& autonomous_effort);

RiccatiPair solve_lq_recursion(const ClosedLoopPair& loops, const QuadraticCostSchedule& costs,
                               const IntentSchedule& intent, Horizon horizon,
                               SelectionRule rule = SelectionRule::kAdmissible);

/// The state-evaluated takeover decision at (x, k, alpha). x = 0 is idle.
TakeoverAction policy_at_state(const Vector& x, int k, const RiccatiPair& pair,
                               const ClosedLoopPair& loops, const QuadraticCostSchedule& costs,
                               const IntentSchedule& intent, FlipDynState alpha,
                               SelectionRule rule = SelectionRule::kAdmissible);

/// |x' P^alpha_k x - (g_alpha(x) + NE continuation of the scalar game
///  built from the quadratic forms at x)| for alpha = H, A.
std::array<double, 2> bellman_consistency_residual(
    const Vector& x, int k, const RiccatiPair& pair, const ClosedLoopPair& loops,
    const QuadraticCostSchedule& costs, const IntentSchedule& intent,
    SelectionRule rule = SelectionRule::kAdmissible);

double quad_form(const Matrix& M, const Vector& x);
/// (L x)' P (L x).
double conjugated_form(const Matrix& P, const Matrix& loop, const Vector& x);

}  // namespace flipcoop
