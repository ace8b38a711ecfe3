#pragma once

#include <Eigen/Core>

#include "flipcoop/core.hpp"

namespace flipcoop {

/// 2x2 continuation costs of one authority state. Row = human action,
/// column = autonomous action; index 0 is idle, 1 is takeover / request.
using CostToGoMatrix = Eigen::Matrix2d;

enum class StepBranch : std::uint8_t {
  kIdleIdle,       // {0,0}
  kHumanTakeover,  // {1,0}, only at alpha = A
  kJointSwitch,    // {1,1}
};

std::string_view to_string(StepBranch branch);
TakeoverAction action_of(StepBranch branch);

/// How the alpha = A equilibrium is selected.
///
/// kAdmissible picks the cost-minimal pure equilibrium among the three
/// candidate entries (idle, human takeover, joint switch).
/// kThreshold applies the closed-form thresholds on v_A - v_H literally
/// (h/p for idle, a/(1-p) for the human-takeover window). It can keep
/// {0,0} while the joint switch is strictly cheaper.
///
/// Both rules let equality fall through to the later branch, and both agree
/// at alpha = H and whenever p = 1.
enum class SelectionRule : std::uint8_t { kAdmissible, kThreshold };

std::string_view to_string(SelectionRule rule);
SelectionRule parse_selection_rule(std::string_view text);

struct StepEquilibrium {
  TakeoverAction action;
  /// The selected Xi entry, i.e. the value before the stage cost g is added.
  double continuation = 0.0;
  StepBranch branch = StepBranch::kIdleIdle;
};

CostToGoMatrix build_xi_h(double v_h_next, double v_a_next, double h, double a);
CostToGoMatrix build_xi_a(double v_h_next, double v_a_next, double h, double a, double p);

/// min over product distributions of y' M z; attained at a pure entry.
/// Diagnostic only, solvers go through the selectors below.
double value_minmin(const CostToGoMatrix& m);

StepEquilibrium ne_select_h(double v_h_next, double v_a_next, double h, double a);
StepEquilibrium ne_select_a(double v_h_next, double v_a_next, double h, double a, double p,
                            SelectionRule rule = SelectionRule::kAdmissible);

}  // namespace flipcoop
