#include "flipcoop/lq_solver.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace flipcoop {
namespace {

constexpr std::string_view kModule = "lq_solver";

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw SolverError(kModule, what + " is " + shape(m) + ", expected " + std::to_string(rows) +
                                   "x" + std::to_string(cols));
  }
}

void require_steps(std::size_t got, int steps, const std::string& what) {
  if (got != static_cast<std::size_t>(steps)) {
    throw SolverError(kModule, what + " has " + std::to_string(got) + " steps, expected " +
                                   std::to_string(steps));
  }
}

void require_cost_matrix(const Matrix& m, Eigen::Index n, const std::string& what) {
  require_shape(m, n, n, what);
  if (!m.allFinite()) throw SolverError(kModule, what + " has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw SolverError(kModule, what + " is not symmetric");
  }
  const double min_eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -1e-12 * scale) {
    std::ostringstream os;
    os << what << " is not positive semidefinite (min eigenvalue " << min_eig << ")";
    throw SolverError(kModule, os.str());
  }
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix conjugate(const Matrix& loop, const Matrix& value) {
  return symmetrized(loop.transpose() * value * loop);
}

// Backward Riccati sweep of one agent; gains indexed k-1.
std::vector<Matrix> riccati_gains(const std::vector<Matrix>& E, const std::vector<Matrix>& input,
                                  const std::vector<Matrix>& stage, const Matrix& terminal,
                                  const Matrix& effort, const char* agent) {
  const int L = static_cast<int>(E.size());
  std::vector<Matrix> gains(static_cast<std::size_t>(L));
  const double effort_floor =
      Eigen::SelfAdjointEigenSolver<Matrix>(effort, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (!(effort_floor > 0.0)) {
    std::ostringstream os;
    os << agent << " effort weight is not positive definite (min eigenvalue " << effort_floor
       << ")";
    throw SolverError(kModule, os.str());
  }
  Matrix S = terminal;
  for (int k = L; k >= 1; --k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const Matrix& Ek = E[i];
    const Matrix& Bk = input[i];
    const Matrix inner = symmetrized(effort + Bk.transpose() * S * Bk);
    const Eigen::LDLT<Matrix> ldlt(inner);
    const double inner_min =
        Eigen::SelfAdjointEigenSolver<Matrix>(inner, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (ldlt.info() != Eigen::Success || !(inner_min > 0.0)) {
      std::ostringstream os;
      os << agent << " Riccati inner matrix singular at k=" << k << " (min eigenvalue "
         << inner_min << ", effort floor " << effort_floor << ")";
      throw SolverError(kModule, os.str(), k);
    }
    const Matrix K = -ldlt.solve(Bk.transpose() * S * Ek);
    const Matrix closed = Ek + Bk * K;
    // Joseph form keeps S symmetric positive semidefinite.
    S = symmetrized(stage[i] + closed.transpose() * S * closed + K.transpose() * effort * K);
    gains[i] = K;
  }
  return gains;
}

void validate_recursion_inputs(const ClosedLoopPair& loops, const QuadraticCostSchedule& costs,
                               const IntentSchedule& intent, Horizon horizon) {
  const int L = horizon.steps();
  require_steps(loops.btilde.size(), L, "closed loop Btilde");
  require_steps(loops.ctilde.size(), L, "closed loop Ctilde");
  if (intent.size() != L) require_steps(static_cast<std::size_t>(intent.size()), L, "intent");
  const Eigen::Index n = loops.state_dim();
  for (int k = 1; k <= L; ++k) {
    require_shape(loops.human(k), n, n, "Btilde_" + std::to_string(k));
    require_shape(loops.autonomous(k), n, n, "Ctilde_" + std::to_string(k));
  }
  costs.validate(n);
  require_steps(costs.G_H.size(), L, "cost schedule");
}

}  // namespace

LinearSystem LinearSystem::time_invariant(const Matrix& E, const Matrix& B, const Matrix& C,
                                          Horizon horizon) {
  const auto L = static_cast<std::size_t>(horizon.steps());
  LinearSystem sys{std::vector<Matrix>(L, E), std::vector<Matrix>(L, B),
                   std::vector<Matrix>(L, C)};
  sys.validate();
  return sys;
}

void LinearSystem::validate() const {
  if (E.empty()) throw SolverError(kModule, "linear system has no steps");
  require_steps(B.size(), steps(), "B");
  require_steps(C.size(), steps(), "C");
  const Eigen::Index n = state_dim();
  const Eigen::Index m = B.front().cols();
  const Eigen::Index p = C.front().cols();
  for (int k = 1; k <= steps(); ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const std::string at = "_" + std::to_string(k);
    require_shape(E[i], n, n, "E" + at);
    require_shape(B[i], n, m, "B" + at);
    require_shape(C[i], n, p, "C" + at);
  }
}

QuadraticCostSchedule QuadraticCostSchedule::time_invariant(const Matrix& G_H, const Matrix& G_A,
                                                            const Matrix& H, const Matrix& A,
                                                            Horizon horizon) {
  const auto L = static_cast<std::size_t>(horizon.steps());
  return {std::vector<Matrix>(L, G_H), std::vector<Matrix>(L, G_A), std::vector<Matrix>(L, H),
          std::vector<Matrix>(L, A),   G_H,                         G_A};
}

void QuadraticCostSchedule::validate(Eigen::Index n) const {
  require_steps(G_A.size(), steps(), "G_A");
  require_steps(H.size(), steps(), "H");
  require_steps(A.size(), steps(), "A");
  for (int k = 1; k <= steps(); ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const std::string at = "_" + std::to_string(k);
    require_cost_matrix(G_H[i], n, "G_H" + at);
    require_cost_matrix(G_A[i], n, "G_A" + at);
    require_cost_matrix(H[i], n, "H" + at);
    require_cost_matrix(A[i], n, "A" + at);
  }
  require_cost_matrix(G_H_terminal, n, "G_H terminal");
  require_cost_matrix(G_A_terminal, n, "G_A terminal");
}

OrderTest strictly_below(const Matrix& lhs, const Matrix& rhs) {
  const Matrix diff = symmetrized(rhs - lhs);
  if (diff.rows() == 1) return {diff(0, 0) > 0.0, false};
  const Vector eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(diff, Eigen::EigenvaluesOnly).eigenvalues();
  if (eig.minCoeff() > 0.0) return {true, false};
  if (eig.maxCoeff() <= 0.0) return {false, false};
  return {diff.trace() > 0.0, true};
}

double quad_form(const Matrix& M, const Vector& x) {
  const Eigen::Index n = x.size();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) col += x(i) * M(i, j);
    sum += col * x(j);
  }
  return sum;
}

double conjugated_form(const Matrix& P, const Matrix& loop, const Vector& x) {
  constexpr Eigen::Index kSmall = 16;
  const Eigen::Index n = x.size();
  if (n > kSmall) return quad_form(P, loop * x);
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kSmall, 1> y(n);
  y.noalias() = loop * x;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) col += y(i) * P(i, j);
    sum += col * y(j);
  }
  return sum;
}

ClosedLoopPair close_loops(const LinearSystem& sys, const FeedbackGains& gains) {
  sys.validate();
  const int L = sys.steps();
  require_steps(gains.K.size(), L, "gain K");
  require_steps(gains.W.size(), L, "gain W");
  ClosedLoopPair loops;
  for (int k = 1; k <= L; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const std::string at = "_" + std::to_string(k);
    require_shape(gains.K[i], sys.B[i].cols(), sys.state_dim(), "K" + at);
    require_shape(gains.W[i], sys.C[i].cols(), sys.state_dim(), "W" + at);
    loops.btilde.push_back(sys.E[i] + sys.B[i] * gains.K[i]);
    loops.ctilde.push_back(sys.E[i] + sys.C[i] * gains.W[i]);
  }
  return loops;
}

FeedbackGains lqr_gains(const LinearSystem& sys, const QuadraticCostSchedule& costs,
                        const Matrix& human_effort, const Matrix& autonomous_effort) {
  sys.validate();
  costs.validate(sys.state_dim());
  require_steps(costs.G_H.size(), sys.steps(), "cost schedule");
  require_shape(human_effort, sys.B.front().cols(), sys.B.front().cols(), "human effort weight");
  require_shape(autonomous_effort, sys.C.front().cols(), sys.C.front().cols(),
                "autonomous effort weight");
  return {riccati_gains(sys.E, sys.B, costs.G_H, costs.G_H_terminal, human_effort, "human"),
          riccati_gains(sys.E, sys.C, costs.G_A, costs.G_A_terminal, autonomous_effort,
                        "autonomous")};
}

RiccatiPair solve_lq_recursion(const ClosedLoopPair& loops, const QuadraticCostSchedule& costs,
                               const IntentSchedule& intent, Horizon horizon,
                               SelectionRule rule) {
  validate_recursion_inputs(loops, costs, intent, horizon);
  const int L = horizon.steps();
  const auto n_values = static_cast<std::size_t>(L + 1);
  RiccatiPair pair{std::vector<Matrix>(n_values), std::vector<Matrix>(n_values),
                   std::vector<StepBranch>(static_cast<std::size_t>(L)),
                   std::vector<StepBranch>(static_cast<std::size_t>(L)),
                   std::vector<BranchWarning>(static_cast<std::size_t>(L))};
  pair.P_H[static_cast<std::size_t>(L)] = costs.G_H_terminal;
  pair.P_A[static_cast<std::size_t>(L)] = costs.G_A_terminal;

  for (int k = L; k >= 1; --k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const double p = intent.at(k);
    const Matrix stay_h = conjugate(loops.human(k), pair.P_H[i + 1]);
    const Matrix stay_a = conjugate(loops.autonomous(k), pair.P_A[i + 1]);
    const Matrix& H = costs.human_takeover(k);
    const Matrix& A = costs.autonomous_takeover(k);
    BranchWarning& warn = pair.warnings[i];

    // alpha = H: keep authority unless the joint switch is no more expensive.
    const Matrix switch_h = stay_a + H + A;
    const OrderTest h_test = strictly_below(stay_h, switch_h);
    warn.indefinite_h = h_test.indefinite;
    pair.branch_H[i] = h_test.below ? StepBranch::kIdleIdle : StepBranch::kJointSwitch;
    pair.P_H[i] = symmetrized(costs.stage(FlipDynState::kHuman, k) +
                              (h_test.below ? stay_h : switch_h));

    // alpha = A: idle, stochastic human takeover, or joint switch.
    const Matrix takeover = p * stay_h + (1.0 - p) * stay_a + H;
    const Matrix joint = stay_h + H + A;
    StepBranch branch_a;
    if (rule == SelectionRule::kAdmissible) {
      const OrderTest vs_takeover = strictly_below(stay_a, takeover);
      const OrderTest vs_joint = strictly_below(stay_a, joint);
      warn.indefinite_a = vs_takeover.indefinite || vs_joint.indefinite;
      if (vs_takeover.below && vs_joint.below) {
        branch_a = StepBranch::kIdleIdle;
      } else {
        const OrderTest joint_test = strictly_below(joint, takeover);
        warn.indefinite_a = warn.indefinite_a || joint_test.indefinite;
        branch_a = joint_test.below ? StepBranch::kJointSwitch : StepBranch::kHumanTakeover;
      }
    } else {
      const Matrix gap = stay_a - stay_h;
      const OrderTest idle_test = p == 0.0 ? OrderTest{true, false} : strictly_below(gap, H / p);
      warn.indefinite_a = idle_test.indefinite;
      if (idle_test.below) {
        branch_a = StepBranch::kIdleIdle;
      } else if (p == 1.0) {
        branch_a = StepBranch::kHumanTakeover;
      } else {
        const OrderTest joint_test = strictly_below(A / (1.0 - p), gap);
        warn.indefinite_a = warn.indefinite_a || joint_test.indefinite;
        branch_a = joint_test.below ? StepBranch::kJointSwitch : StepBranch::kHumanTakeover;
      }
    }
    pair.branch_A[i] = branch_a;
    const Matrix& chosen = branch_a == StepBranch::kIdleIdle        ? stay_a
                           : branch_a == StepBranch::kHumanTakeover ? takeover
                                                                    : joint;
    pair.P_A[i] = symmetrized(costs.stage(FlipDynState::kAutonomous, k) + chosen);
  }
  return pair;
}

namespace {

struct StateTerms {
  double v_h_next, v_a_next, h, a;
};

StateTerms terms_at(const Vector& x, int k, const RiccatiPair& pair, const ClosedLoopPair& loops,
                    const QuadraticCostSchedule& costs) {
  if (k < 1 || k > pair.steps()) {
    throw SolverError(kModule, "time index " + std::to_string(k) + " outside 1.." +
                                   std::to_string(pair.steps()));
  }
  if (!x.allFinite()) throw SolverError(kModule, "state has non-finite entries", k);
  return {conjugated_form(pair.value(FlipDynState::kHuman, k + 1), loops.human(k), x),
          conjugated_form(pair.value(FlipDynState::kAutonomous, k + 1), loops.autonomous(k), x),
          quad_form(costs.human_takeover(k), x), quad_form(costs.autonomous_takeover(k), x)};
}

}  // namespace

TakeoverAction policy_at_state(const Vector& x, int k, const RiccatiPair& pair,
                               const ClosedLoopPair& loops, const QuadraticCostSchedule& costs,
                               const IntentSchedule& intent, FlipDynState alpha,
                               SelectionRule rule) {
  if (x.isZero(0.0)) return {};
  const StateTerms t = terms_at(x, k, pair, loops, costs);
  if (alpha == FlipDynState::kHuman) return ne_select_h(t.v_h_next, t.v_a_next, t.h, t.a).action;
  return ne_select_a(t.v_h_next, t.v_a_next, t.h, t.a, intent.at(k), rule).action;
}

std::array<double, 2> bellman_consistency_residual(const Vector& x, int k,
                                                   const RiccatiPair& pair,
                                                   const ClosedLoopPair& loops,
                                                   const QuadraticCostSchedule& costs,
                                                   const IntentSchedule& intent,
                                                   SelectionRule rule) {
  const StateTerms t = terms_at(x, k, pair, loops, costs);
  const double bellman_h = quad_form(costs.stage(FlipDynState::kHuman, k), x) +
                           ne_select_h(t.v_h_next, t.v_a_next, t.h, t.a).continuation;
  const double bellman_a =
      quad_form(costs.stage(FlipDynState::kAutonomous, k), x) +
      ne_select_a(t.v_h_next, t.v_a_next, t.h, t.a, intent.at(k), rule).continuation;
  return {std::abs(quad_form(pair.value(FlipDynState::kHuman, k), x) - bellman_h),
          std::abs(quad_form(pair.value(FlipDynState::kAutonomous, k), x) - bellman_a)};
}

}  // namespace flipcoop
