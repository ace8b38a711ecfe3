#include "flipcoop/general_solver.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace flipcoop {
namespace {

constexpr std::string_view kModule = "general_solver";

void require_table(const std::vector<std::vector<StateId>>& table, std::size_t num_states,
                   int steps, const char* name) {
  if (table.size() != static_cast<std::size_t>(steps)) {
    throw SolverError(kModule, std::string(name) + " has " + std::to_string(table.size()) +
                                   " steps, expected " + std::to_string(steps));
  }
  for (std::size_t k = 0; k < table.size(); ++k) {
    if (table[k].size() != num_states) {
      throw SolverError(kModule, std::string(name) + " row " + std::to_string(k + 1) +
                                     " does not cover every state");
    }
    for (StateId next : table[k]) {
      if (next >= num_states) {
        throw SolverError(kModule, std::string(name) + " at k=" + std::to_string(k + 1) +
                                       " escapes the state set (successor " +
                                       std::to_string(next) + ")",
                          static_cast<int>(k + 1));
      }
    }
  }
}

double checked_cost(double c, const char* what, StateId x, int k) {
  if (!std::isfinite(c) || c < 0.0) {
    std::ostringstream os;
    os << what << " at state " << x << ", k=" << k << " must be finite and >= 0, got " << c;
    throw SolverError(kModule, os.str(), k);
  }
  return c;
}

}  // namespace

FiniteGameSpec::FiniteGameSpec(std::size_t num_states, std::vector<std::vector<StateId>> step_h,
                               std::vector<std::vector<StateId>> step_a,
                               const StageCostEvaluators<StateId>& costs, IntentSchedule intent,
                               Horizon horizon)
    : num_states_(num_states),
      step_h_(std::move(step_h)),
      step_a_(std::move(step_a)),
      intent_(std::move(intent)),
      horizon_(horizon) {
  if (num_states_ == 0) throw SolverError(kModule, "state set is empty");
  const int L = horizon_.steps();
  if (intent_.size() != L) {
    throw SolverError(kModule, "intent schedule length " + std::to_string(intent_.size()) +
                                   " != horizon " + std::to_string(L));
  }
  require_table(step_h_, num_states_, L, "step_h");
  require_table(step_a_, num_states_, L, "step_a");

  stage_.assign(static_cast<std::size_t>(L), std::vector<std::array<double, 2>>(num_states_));
  human_takeover_.assign(static_cast<std::size_t>(L), std::vector<double>(num_states_));
  autonomous_takeover_.assign(static_cast<std::size_t>(L), std::vector<double>(num_states_));
  terminal_.resize(num_states_);
  for (StateId x = 0; x < num_states_; ++x) {
    for (FlipDynState s : kFlipDynStates) {
      terminal_[x][index_of(s)] = checked_cost(costs.terminal(x, s), "terminal cost", x, L + 1);
    }
    for (int k = 1; k <= L; ++k) {
      for (FlipDynState s : kFlipDynStates) {
        stage_[idx(k)][x][index_of(s)] = checked_cost(costs.stage(x, s, k), "stage cost", x, k);
      }
      human_takeover_[idx(k)][x] = checked_cost(costs.human_takeover(x, k), "h", x, k);
      autonomous_takeover_[idx(k)][x] = checked_cost(costs.autonomous_takeover(x, k), "a", x, k);
    }
  }
}

ValueTables::ValueTables(int steps, std::size_t num_states)
    : v_(static_cast<std::size_t>(steps + 1), std::vector<std::array<double, 2>>(num_states)) {}

PolicyTables::PolicyTables(int steps, std::size_t num_states)
    : b_(static_cast<std::size_t>(steps),
         std::vector<std::array<StepBranch, 2>>(num_states)) {}

BackwardSolution solve_backward(const FiniteGameSpec& spec, SelectionRule rule) {
  const int L = spec.steps();
  const std::size_t n = spec.num_states();
  BackwardSolution sol{ValueTables(L, n), PolicyTables(L, n)};

  for (StateId x = 0; x < n; ++x) {
    for (FlipDynState s : kFlipDynStates) sol.values.at(L + 1, x, s) = spec.terminal(x, s);
  }
  // Row k is written completely before row k-1 is read.
  for (int k = L; k >= 1; --k) {
    const double p = spec.intent().at(k);
    for (StateId x = 0; x < n; ++x) {
      const double v_h_next = sol.values.v_h(k + 1, spec.step_h(x, k));
      const double v_a_next = sol.values.v_a(k + 1, spec.step_a(x, k));
      const double h = spec.human_takeover(x, k);
      const double a = spec.autonomous_takeover(x, k);

      const StepEquilibrium at_h = ne_select_h(v_h_next, v_a_next, h, a);
      const StepEquilibrium at_a = ne_select_a(v_h_next, v_a_next, h, a, p, rule);
      sol.values.at(k, x, FlipDynState::kHuman) =
          spec.stage(x, FlipDynState::kHuman, k) + at_h.continuation;
      sol.values.at(k, x, FlipDynState::kAutonomous) =
          spec.stage(x, FlipDynState::kAutonomous, k) + at_a.continuation;
      sol.policy.branch(k, x, FlipDynState::kHuman) = at_h.branch;
      sol.policy.branch(k, x, FlipDynState::kAutonomous) = at_a.branch;
    }
  }
  return sol;
}

namespace {

struct Node {
  int k;
  StateId x;
  FlipDynState alpha;
  auto key() const { return std::tuple(k, x, index_of(alpha)); }
};

class ProfileEnumerator {
 public:
  ProfileEnumerator(const FiniteGameSpec& spec, const OracleOptions& options)
      : spec_(spec), options_(options) {}

  double minimum(FlipDynState alpha1, StateId x1) {
    collect({1, x1, alpha1});
    choice_.assign(nodes_.size(), 0);

    double total = 1.0;
    for (const Node& node : nodes_) total *= static_cast<double>(choices(node.alpha));
    if (total > static_cast<double>(options_.max_profiles)) {
      std::ostringstream os;
      os << "enumerate_oracle: " << nodes_.size() << " reachable decision nodes give " << total
         << " profiles, bound is " << options_.max_profiles;
      throw SolverError(kModule, os.str());
    }

    double best = std::numeric_limits<double>::infinity();
    for (;;) {
      best = std::min(best, evaluate(1, x1, alpha1));
      // Mixed-radix increment over the per-node action choices.
      std::size_t i = 0;
      for (; i < nodes_.size(); ++i) {
        if (++choice_[i] < choices(nodes_[i].alpha)) break;
        choice_[i] = 0;
      }
      if (i == nodes_.size()) break;
    }
    return best;
  }

 private:
  std::size_t choices(FlipDynState alpha) const {
    return alpha == FlipDynState::kAutonomous && options_.admissible_only ? 3 : 4;
  }

  TakeoverAction action_at(std::size_t node) const {
    static constexpr std::array<TakeoverAction, 3> kAdmissibleAtA = {
        TakeoverAction{false, false}, TakeoverAction{true, false}, TakeoverAction{true, true}};
    const std::size_t c = choice_[node];
    if (nodes_[node].alpha == FlipDynState::kAutonomous && options_.admissible_only) {
      return kAdmissibleAtA[c];
    }
    return kAllActions[c];
  }

  void collect(const Node& root) {
    std::vector<Node> frontier{root};
    while (!frontier.empty()) {
      const Node node = frontier.back();
      frontier.pop_back();
      if (node.k > spec_.steps() || index_.count(node.key()) != 0) continue;
      index_.emplace(node.key(), nodes_.size());
      nodes_.push_back(node);
      for (FlipDynState next : kFlipDynStates) {
        frontier.push_back({node.k + 1, spec_.successor(node.x, node.k, next), next});
      }
    }
  }

  double evaluate(int k, StateId x, FlipDynState alpha) const {
    if (k > spec_.steps()) return spec_.terminal(x, alpha);
    const TakeoverAction act = action_at(index_.at(std::tuple(k, x, index_of(alpha))));
    double cost = spec_.stage(x, alpha, k);
    if (act.human) cost += spec_.human_takeover(x, k);
    if (act.autonomous) cost += spec_.autonomous_takeover(x, k);
    const StateDistribution next = flipdyn_transition_dist(alpha, act, spec_.intent().at(k));
    for (FlipDynState s : kFlipDynStates) {
      if (next[s] > 0.0) cost += next[s] * evaluate(k + 1, spec_.successor(x, k, s), s);
    }
    return cost;
  }

  const FiniteGameSpec& spec_;
  const OracleOptions& options_;
  std::vector<Node> nodes_;
  std::map<std::tuple<int, StateId, std::size_t>, std::size_t> index_;
  std::vector<std::size_t> choice_;
};

}  // namespace

double enumerate_oracle(const FiniteGameSpec& spec, FlipDynState alpha1, StateId x1,
                        const OracleOptions& options) {
  if (spec.steps() > options.max_steps || spec.num_states() > options.max_states) {
    std::ostringstream os;
    os << "enumerate_oracle: game has L=" << spec.steps() << ", |states|=" << spec.num_states()
       << "; bound is L<=" << options.max_steps << ", |states|<=" << options.max_states;
    throw SolverError(kModule, os.str());
  }
  if (x1 >= spec.num_states()) throw SolverError(kModule, "enumerate_oracle: x1 out of range");
  return ProfileEnumerator(spec, options).minimum(alpha1, x1);
}

FiniteStrategy FiniteStrategy::from_policy(const PolicyTables& policy) {
  FiniteStrategy s;
  const auto L = static_cast<std::size_t>(policy.steps());
  s.beta.assign(L, std::vector<std::array<double, 2>>(policy.num_states()));
  s.gamma = s.beta;
  for (int k = 1; k <= policy.steps(); ++k) {
    for (StateId x = 0; x < policy.num_states(); ++x) {
      for (FlipDynState a : kFlipDynStates) {
        const TakeoverAction act = policy.action(k, x, a);
        s.beta[static_cast<std::size_t>(k - 1)][x][index_of(a)] = act.human ? 1.0 : 0.0;
        s.gamma[static_cast<std::size_t>(k - 1)][x][index_of(a)] = act.autonomous ? 1.0 : 0.0;
      }
    }
  }
  return s;
}

FiniteStrategy FiniteStrategy::from_behavioral(const BehavioralStrategy& b,
                                               std::size_t num_states) {
  FiniteStrategy s;
  for (int k = 1; k <= b.steps(); ++k) {
    const std::array<double, 2> beta{b.beta(k, FlipDynState::kHuman),
                                     b.beta(k, FlipDynState::kAutonomous)};
    const std::array<double, 2> gamma{b.gamma(k, FlipDynState::kHuman),
                                      b.gamma(k, FlipDynState::kAutonomous)};
    s.beta.emplace_back(num_states, beta);
    s.gamma.emplace_back(num_states, gamma);
  }
  return s;
}

double expected_cost(const FiniteGameSpec& spec, const FiniteStrategy& strategy,
                     FlipDynState alpha1, StateId x1) {
  const int L = spec.steps();
  const std::size_t n = spec.num_states();
  if (strategy.beta.size() != static_cast<std::size_t>(L) ||
      strategy.gamma.size() != static_cast<std::size_t>(L)) {
    throw SolverError(kModule, "expected_cost: strategy does not cover the horizon");
  }
  if (x1 >= n) throw SolverError(kModule, "expected_cost: x1 out of range");

  std::vector<std::array<double, 2>> dist(n, {0.0, 0.0});
  dist[x1][index_of(alpha1)] = 1.0;
  double total = 0.0;

  for (int k = 1; k <= L; ++k) {
    const auto row = static_cast<std::size_t>(k - 1);
    const double p = spec.intent().at(k);
    std::vector<std::array<double, 2>> next(n, {0.0, 0.0});
    for (StateId x = 0; x < n; ++x) {
      for (FlipDynState alpha : kFlipDynStates) {
        const double mass = dist[x][index_of(alpha)];
        if (mass == 0.0) continue;
        const double beta = strategy.beta[row][x][index_of(alpha)];
        const double gamma = strategy.gamma[row][x][index_of(alpha)];
        total += mass * (spec.stage(x, alpha, k) + beta * spec.human_takeover(x, k) +
                         gamma * spec.autonomous_takeover(x, k));
        for (TakeoverAction act : kAllActions) {
          const double w = (act.human ? beta : 1.0 - beta) * (act.autonomous ? gamma : 1.0 - gamma);
          if (w == 0.0) continue;
          const StateDistribution d = flipdyn_transition_dist(alpha, act, p);
          for (FlipDynState s : kFlipDynStates) {
            if (d[s] > 0.0) next[spec.successor(x, k, s)][index_of(s)] += mass * w * d[s];
          }
        }
      }
    }
    dist = std::move(next);
  }
  for (StateId x = 0; x < n; ++x) {
    for (FlipDynState s : kFlipDynStates) total += dist[x][index_of(s)] * spec.terminal(x, s);
  }
  return total;
}

}  // namespace flipcoop
