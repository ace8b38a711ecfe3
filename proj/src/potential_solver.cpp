#include "flipcoop/potential_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flipcoop {
namespace {

constexpr std::string_view kModule = "potential_solver";

CostToGoMatrix candidate(FlipDynState alpha, const AgentTerms& hdag, const AgentTerms& adag) {
  CostToGoMatrix psi;
  if (alpha == FlipDynState::kHuman) {
    const double gap = hdag.v_h_next - hdag.v_a_next;
    psi << gap - hdag.h - adag.a, gap - hdag.h,
           gap - adag.a, 0.0;
  } else {
    const double gap = hdag.v_a_next - hdag.v_h_next;
    psi << gap - hdag.h - adag.a, gap - hdag.h,
           -adag.a, 0.0;
  }
  return psi;
}

CostToGoMatrix agent_matrix(FlipDynState alpha, const AgentTerms& t) {
  if (alpha == FlipDynState::kHuman) return build_xi_h(t.v_h_next, t.v_a_next, t.h, t.a);
  return build_xi_a(t.v_h_next, t.v_a_next, t.h, t.a, 1.0);
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix conjugate(const Matrix& loop, const Matrix& value) {
  return symmetrized(loop.transpose() * value * loop);
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

std::string_view to_string(Agent agent) {
  return agent == Agent::kHuman ? "human_agent" : "autonomous_agent";
}

void AgentCostSchedules::validate(Eigen::Index n) const {
  human.validate(n);
  autonomous.validate(n);
  if (human.steps() != autonomous.steps()) {
    throw SolverError(kModule, "agent schedules have different lengths (" +
                                   std::to_string(human.steps()) + " vs " +
                                   std::to_string(autonomous.steps()) + ")");
  }
}

BimatrixPair build_bimatrix(FlipDynState alpha, const AgentTerms& hdag, const AgentTerms& adag) {
  return {agent_matrix(alpha, hdag), agent_matrix(alpha, adag), alpha};
}

double alternating_sum(const CostToGoMatrix& m) {
  return m(0, 0) - m(0, 1) - m(1, 0) + m(1, 1);
}

double existence_residual(const BimatrixPair& pair) {
  if (pair.alpha == FlipDynState::kAutonomous) return 0.0;
  return std::abs(alternating_sum(pair.human) - alternating_sum(pair.autonomous));
}

double default_existence_tolerance(const BimatrixPair& pair) {
  const double scale =
      std::max({1.0, pair.human.cwiseAbs().maxCoeff(), pair.autonomous.cwiseAbs().maxCoeff()});
  return 1e-9 * scale;
}

bool check_exact_potential(const BimatrixPair& pair, double tol) {
  return existence_residual(pair) <= tol;
}

CostToGoMatrix build_potential(FlipDynState alpha, const AgentTerms& hdag,
                               const AgentTerms& adag, std::optional<double> tol) {
  const BimatrixPair pair = build_bimatrix(alpha, hdag, adag);
  const double limit = tol.value_or(default_existence_tolerance(pair));
  const double residual = existence_residual(pair);
  if (!(residual <= limit)) {
    std::ostringstream os;
    os.precision(17);
    os << "no exact potential at alpha=" << to_char(alpha) << ": residual " << residual
       << " exceeds tolerance " << limit;
    throw SolverError(kModule, os.str());
  }
  return candidate(alpha, hdag, adag);
}

StepBranch select_from_potential(FlipDynState alpha, const CostToGoMatrix& psi) {
  if (alpha == FlipDynState::kHuman) {
    return psi(0, 0) < psi(1, 1) ? StepBranch::kIdleIdle : StepBranch::kJointSwitch;
  }
  return psi(0, 0) < psi(1, 0) ? StepBranch::kIdleIdle : StepBranch::kHumanTakeover;
}

const Matrix& QTables::value(FlipDynState s, Agent agent, int k) const {
  const auto i = static_cast<std::size_t>(k - 1);
  if (s == FlipDynState::kHuman) return (agent == Agent::kHuman ? Q_H_hdag : Q_H_adag).at(i);
  return (agent == Agent::kHuman ? Q_A_hdag : Q_A_adag).at(i);
}

QTables solve_potential_recursion(const ClosedLoopPair& loops, const AgentCostSchedules& costs,
                                  Horizon horizon, const PotentialOptions& options) {
  const int L = horizon.steps();
  if (loops.steps() != L) {
    throw SolverError(kModule, "closed loops have " + std::to_string(loops.steps()) +
                                   " steps, horizon is " + std::to_string(L));
  }
  costs.validate(loops.state_dim());
  if (costs.steps() != L) {
    throw SolverError(kModule, "cost schedules have " + std::to_string(costs.steps()) +
                                   " steps, horizon is " + std::to_string(L));
  }
  if (!(options.relative_tolerance >= 0.0)) {
    throw SolverError(kModule, "existence tolerance must be nonnegative");
  }

  const auto n_values = static_cast<std::size_t>(L + 1);
  const auto n_steps = static_cast<std::size_t>(L);
  QTables q{std::vector<Matrix>(n_values),          std::vector<Matrix>(n_values),
            std::vector<Matrix>(n_values),          std::vector<Matrix>(n_values),
            std::vector<StepBranch>(n_steps),       std::vector<StepBranch>(n_steps),
            std::vector<BranchWarning>(n_steps),    std::vector<double>(n_steps, 0.0),
            std::vector<bool>(n_steps, false)};
  const QuadraticCostSchedule& ch = costs.human;
  const QuadraticCostSchedule& ca = costs.autonomous;
  q.Q_H_hdag[n_steps] = ch.G_H_terminal;
  q.Q_A_hdag[n_steps] = ch.G_A_terminal;
  q.Q_H_adag[n_steps] = ca.G_H_terminal;
  q.Q_A_adag[n_steps] = ca.G_A_terminal;

  for (int k = L; k >= 1; --k) {
    const auto i = static_cast<std::size_t>(k - 1);
    const Matrix& Bt = loops.human(k);
    const Matrix& Ct = loops.autonomous(k);
    // Continuations through each closed loop, per agent.
    const Matrix bh_h = conjugate(Bt, q.Q_H_hdag[i + 1]);
    const Matrix ca_h = conjugate(Ct, q.Q_A_hdag[i + 1]);
    const Matrix bh_a = conjugate(Bt, q.Q_H_adag[i + 1]);
    const Matrix ca_a = conjugate(Ct, q.Q_A_adag[i + 1]);

    const Matrix residual = (ca_h - bh_h) - (ca_a - bh_a);
    const double scale =
        std::max({1.0, max_abs(bh_h), max_abs(ca_h), max_abs(bh_a), max_abs(ca_a)});
    q.existence_residual[i] = max_abs(residual);
    if (!(q.existence_residual[i] <= options.relative_tolerance * scale)) {
      if (options.existence == ExistenceMode::kStrict) {
        std::ostringstream os;
        os.precision(17);
        os << "exact potential does not exist at k=" << k << " (residual "
           << q.existence_residual[i] << ", tolerance " << options.relative_tolerance * scale
           << ")";
        throw SolverError(kModule, os.str(), k);
      }
      q.existence_violated[i] = true;
    }

    const OrderTest h_test =
        strictly_below(bh_h, ca_h + ch.human_takeover(k) + ca.autonomous_takeover(k));
    const OrderTest a_test = strictly_below(ca_h, bh_h + ch.human_takeover(k));
    q.warnings[i] = {h_test.indefinite, a_test.indefinite};
    const bool stay_h = h_test.below;
    const bool stay_a = a_test.below;
    q.branch_H[i] = stay_h ? StepBranch::kIdleIdle : StepBranch::kJointSwitch;
    q.branch_A[i] = stay_a ? StepBranch::kIdleIdle : StepBranch::kHumanTakeover;

    const auto update = [&](const QuadraticCostSchedule& c, const Matrix& bh, const Matrix& ca_,
                            Matrix& out_h, Matrix& out_a) {
      out_h = symmetrized(c.stage(FlipDynState::kHuman, k) +
                          (stay_h ? bh : Matrix(ca_ + c.human_takeover(k) +
                                                c.autonomous_takeover(k))));
      out_a = symmetrized(c.stage(FlipDynState::kAutonomous, k) +
                          (stay_a ? ca_ : Matrix(bh + c.human_takeover(k))));
    };
    update(ch, bh_h, ca_h, q.Q_H_hdag[i], q.Q_A_hdag[i]);
    update(ca, bh_a, ca_a, q.Q_H_adag[i], q.Q_A_adag[i]);
  }
  return q;
}

TakeoverAction potential_policy_at_state(const Vector& x, int k, const QTables& q,
                                         const ClosedLoopPair& loops,
                                         const AgentCostSchedules& costs, FlipDynState alpha) {
  if (k < 1 || k > q.steps()) {
    throw SolverError(kModule, "time index " + std::to_string(k) + " outside 1.." +
                                   std::to_string(q.steps()));
  }
  if (x.isZero(0.0)) return {};
  const auto terms = [&](Agent agent) {
    const QuadraticCostSchedule& c = costs.of(agent);
    return AgentTerms{conjugated_form(q.value(FlipDynState::kHuman, agent, k + 1), loops.human(k), x),
                      conjugated_form(q.value(FlipDynState::kAutonomous, agent, k + 1),
                                      loops.autonomous(k), x),
                      quad_form(c.human_takeover(k), x), quad_form(c.autonomous_takeover(k), x)};
  };
  const CostToGoMatrix psi = candidate(alpha, terms(Agent::kHuman), terms(Agent::kAutonomous));
  return action_of(select_from_potential(alpha, psi));
}

}  // namespace flipcoop
