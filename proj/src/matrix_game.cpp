#include "flipcoop/matrix_game.hpp"

#include <cmath>
#include <string>

namespace flipcoop {
namespace {

void require_finite(std::initializer_list<double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError(std::string(where) + ": non-finite input");
  }
}

StepEquilibrium select(const CostToGoMatrix& xi, StepBranch branch) {
  const TakeoverAction action = action_of(branch);
  return {action, xi(action.human ? 1 : 0, action.autonomous ? 1 : 0), branch};
}

}  // namespace

std::string_view to_string(StepBranch branch) {
  switch (branch) {
    case StepBranch::kIdleIdle: return "idle";
    case StepBranch::kHumanTakeover: return "human_takeover";
    case StepBranch::kJointSwitch: return "joint_switch";
  }
  return "?";
}

TakeoverAction action_of(StepBranch branch) {
  switch (branch) {
    case StepBranch::kIdleIdle: return {false, false};
    case StepBranch::kHumanTakeover: return {true, false};
    case StepBranch::kJointSwitch: return {true, true};
  }
  return {};
}

std::string_view to_string(SelectionRule rule) {
  return rule == SelectionRule::kAdmissible ? "admissible" : "threshold";
}

SelectionRule parse_selection_rule(std::string_view text) {
  if (text == "admissible") return SelectionRule::kAdmissible;
  if (text == "threshold") return SelectionRule::kThreshold;
  throw DomainError("selection rule must be \"admissible\" or \"threshold\", got \"" +
                    std::string(text) + "\"");
}

CostToGoMatrix build_xi_h(double v_h_next, double v_a_next, double h, double a) {
  require_finite({v_h_next, v_a_next, h, a}, "build_xi_h");
  CostToGoMatrix xi;
  xi << v_h_next, v_h_next + a,
        v_h_next + h, v_a_next + h + a;
  return xi;
}

CostToGoMatrix build_xi_a(double v_h_next, double v_a_next, double h, double a, double p) {
  require_finite({v_h_next, v_a_next, h, a, p}, "build_xi_a");
  check_probability(p, "intent probability");
  CostToGoMatrix xi;
  xi << v_a_next, v_a_next + a,
        p * v_h_next + (1.0 - p) * v_a_next + h, v_h_next + h + a;
  return xi;
}

double value_minmin(const CostToGoMatrix& m) {
  require_finite({m(0, 0), m(0, 1), m(1, 0), m(1, 1)}, "value_minmin");
  return m.minCoeff();
}

StepEquilibrium ne_select_h(double v_h_next, double v_a_next, double h, double a) {
  const CostToGoMatrix xi = build_xi_h(v_h_next, v_a_next, h, a);
  return select(xi, xi(0, 0) < xi(1, 1) ? StepBranch::kIdleIdle : StepBranch::kJointSwitch);
}

StepEquilibrium ne_select_a(double v_h_next, double v_a_next, double h, double a, double p,
                            SelectionRule rule) {
  const CostToGoMatrix xi = build_xi_a(v_h_next, v_a_next, h, a, p);
  const double idle = xi(0, 0);
  const double takeover = xi(1, 0);
  const double joint = xi(1, 1);

  if (rule == SelectionRule::kAdmissible) {
    if (idle < takeover && idle < joint) return select(xi, StepBranch::kIdleIdle);
    return select(xi, joint < takeover ? StepBranch::kJointSwitch : StepBranch::kHumanTakeover);
  }

  // Thresholds on the value gap; p = 0 and p = 1 act as +infinity.
  const double gap = v_a_next - v_h_next;
  if (p == 0.0 || gap < h / p) return select(xi, StepBranch::kIdleIdle);
  if (p == 1.0 || gap <= a / (1.0 - p)) return select(xi, StepBranch::kHumanTakeover);
  return select(xi, StepBranch::kJointSwitch);
}

}  // namespace flipcoop
