#include "flipcoop/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <thread>

namespace flipcoop {
namespace {

constexpr std::string_view kModule = "sim";

using ActionDistribution = std::vector<std::pair<TakeoverAction, double>>;

/// Scenario with its closed loops resolved once.
class Engine {
 public:
  Engine(const Scenario& scenario, const PolicySource& policy)
      : scenario_(scenario), policy_(policy), loops_(scenario.closed_loops()) {
    check_policy();
  }

  const ClosedLoopPair& loops() const { return loops_; }

  double step_cost(const Vector& x, FlipDynState alpha, TakeoverAction action, int k) const {
    const QuadraticCostSchedule& c = scenario_.scoring_costs();
    double cost = quad_form(c.stage(alpha, k), x);
    if (action.human) cost += quad_form(c.human_takeover(k), x);
    if (action.autonomous) cost += quad_form(c.autonomous_takeover(k), x);
    return cost;
  }

  double terminal_cost(const Vector& x, FlipDynState alpha) const {
    return quad_form(scenario_.scoring_costs().terminal(alpha), x);
  }

  void advance(const Vector& x, FlipDynState next, int k, Vector& out) const {
    out.noalias() = loops_.under(next, k) * x;
  }

  TakeoverAction sample_action(const Vector& x, int k, FlipDynState alpha,
                               RandomStream& rng) const {
    if (const auto* b = std::get_if<BehavioralStrategy>(&policy_)) {
      const bool human = rng.bernoulli(b->beta(k, alpha));
      const bool autonomous = rng.bernoulli(b->gamma(k, alpha));
      return {human, autonomous};
    }
    return pure_action(x, k, alpha);
  }

  ActionDistribution action_distribution(const Vector& x, int k, FlipDynState alpha) const {
    if (const auto* b = std::get_if<BehavioralStrategy>(&policy_)) {
      const double beta = b->beta(k, alpha);
      const double gamma = b->gamma(k, alpha);
      ActionDistribution out;
      for (const TakeoverAction& a : kAllActions) {
        const double w = (a.human ? beta : 1.0 - beta) * (a.autonomous ? gamma : 1.0 - gamma);
        if (w > 0.0) out.emplace_back(a, w);
      }
      return out;
    }
    return {{pure_action(x, k, alpha), 1.0}};
  }

 private:
  TakeoverAction pure_action(const Vector& x, int k, FlipDynState alpha) const {
    if (const auto* lq = std::get_if<LqPolicy>(&policy_)) {
      return policy_at_state(x, k, lq->pair, loops_, scenario_.scoring_costs(), scenario_.intent,
                             alpha, lq->rule);
    }
    if (const auto* pot = std::get_if<PotentialPolicy>(&policy_)) {
      return potential_policy_at_state(x, k, pot->tables, loops_, scenario_.agent_costs(), alpha);
    }
    const auto& tab = std::get<TabularPolicy>(policy_);
    return tab.tables.action(k, tab.locate(x, k), alpha);
  }

  void check_policy() const {
    const int L = scenario_.horizon.steps();
    const int covered = std::visit(
        [](const auto& p) -> int {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LqPolicy>) return p.pair.steps();
          else if constexpr (std::is_same_v<T, PotentialPolicy>) return p.tables.steps();
          else if constexpr (std::is_same_v<T, TabularPolicy>) return p.tables.steps();
          else return p.steps();
        },
        policy_);
    if (covered != L) {
      throw SolverError(kModule, "policy covers " + std::to_string(covered) +
                                     " steps, horizon is " + std::to_string(L));
    }
    if (std::holds_alternative<PotentialPolicy>(policy_) && !scenario_.has_agent_costs()) {
      throw SolverError(kModule, "potential policy needs per-agent cost schedules");
    }
    if (const auto* tab = std::get_if<TabularPolicy>(&policy_); tab && !tab->locate) {
      throw SolverError(kModule, "tabular policy has no state locator");
    }
  }

  const Scenario& scenario_;
  const PolicySource& policy_;
  ClosedLoopPair loops_;
};

bool diverged_state(const Vector& x) {
  return !x.allFinite() || x.norm() > kDivergenceNorm;
}

/// Simulates one trajectory. `on_step(x, alpha)` sees x_k and alpha_k for
/// each recorded k, `on_action` the action at k. Returns the realized cost
/// and the step at which the run diverged (0 if it did not).
template <class OnState, class OnAction>
std::pair<double, int> simulate(const Engine& engine, const Scenario& scenario, RandomStream& rng,
                                OnState&& on_state, OnAction&& on_action) {
  const int L = scenario.horizon.steps();
  Vector x = scenario.x1;
  Vector next(x.size());
  FlipDynState alpha = scenario.alpha1;
  on_state(x, alpha);
  double cost = 0.0;
  for (int k = 1; k <= L; ++k) {
    const TakeoverAction action = engine.sample_action(x, k, alpha, rng);
    cost += engine.step_cost(x, alpha, action, k);
    on_action(action);
    alpha = flipdyn_transition_sample(alpha, action, scenario.intent.at(k), rng);
    engine.advance(x, alpha, k, next);
    x.swap(next);
    if (diverged_state(x)) return {cost, k};
    on_state(x, alpha);
  }
  return {cost + engine.terminal_cost(x, alpha), 0};
}

Rollout run_one(const Engine& engine, const Scenario& scenario, std::uint64_t seed,
                std::uint64_t stream) {
  const auto L = static_cast<std::size_t>(scenario.horizon.steps());
  RandomStream rng(seed, stream);
  Rollout r;
  r.seed = seed;
  r.stream = stream;
  r.states.reserve(L + 1);
  r.alphas.reserve(L + 1);
  r.actions.reserve(L);
  const auto [cost, diverged_at] = simulate(
      engine, scenario, rng,
      [&r](const Vector& x, FlipDynState a) {
        r.states.push_back(x);
        r.alphas.push_back(a);
      },
      [&r](TakeoverAction a) { r.actions.push_back(a); });
  r.realized_cost = cost;
  r.diverged = diverged_at != 0;
  return r;
}

QuadraticCostSchedule gain_costs(const Scenario& s) {
  if (!s.has_agent_costs()) return std::get<QuadraticCostSchedule>(s.costs);
  const AgentCostSchedules& a = std::get<AgentCostSchedules>(s.costs);
  QuadraticCostSchedule merged = a.human;
  merged.G_A = a.autonomous.G_A;
  merged.G_A_terminal = a.autonomous.G_A_terminal;
  return merged;
}

struct AtomKey {
  FlipDynState alpha;
  std::vector<double> x;

  bool operator<(const AtomKey& o) const {
    if (alpha != o.alpha) return alpha < o.alpha;
    return x < o.x;
  }
};

}  // namespace

const QuadraticCostSchedule& Scenario::scoring_costs() const {
  if (const auto* q = std::get_if<QuadraticCostSchedule>(&costs)) return *q;
  return std::get<AgentCostSchedules>(costs).human;
}

const AgentCostSchedules& Scenario::agent_costs() const {
  if (const auto* a = std::get_if<AgentCostSchedules>(&costs)) return *a;
  throw SolverError(kModule, "scenario \"" + label + "\" has a single shared cost schedule");
}

FeedbackGains Scenario::resolved_gains() const {
  if (const auto* g = std::get_if<FeedbackGains>(&gains)) return *g;
  const auto& req = std::get<GainSynthesis>(gains);
  return lqr_gains(system, gain_costs(*this), req.human_effort, req.autonomous_effort);
}

ClosedLoopPair Scenario::closed_loops() const { return close_loops(system, resolved_gains()); }

void Scenario::validate() const {
  system.validate();
  const int L = horizon.steps();
  if (system.steps() != L) {
    throw SolverError(kModule, "system has " + std::to_string(system.steps()) +
                                   " steps, horizon is " + std::to_string(L));
  }
  if (intent.size() != L) {
    throw SolverError(kModule, "intent schedule has " + std::to_string(intent.size()) +
                                   " entries, horizon is " + std::to_string(L));
  }
  std::visit([&](const auto& c) { c.validate(system.state_dim()); }, costs);
  const int cost_steps = std::visit([](const auto& c) { return c.steps(); }, costs);
  if (cost_steps != L) {
    throw SolverError(kModule, "cost schedule has " + std::to_string(cost_steps) +
                                   " steps, horizon is " + std::to_string(L));
  }
  if (x1.size() != system.state_dim() || !x1.allFinite()) {
    throw SolverError(kModule, "initial state must be a finite vector of length " +
                                   std::to_string(system.state_dim()));
  }
  closed_loops();
}

Rollout rollout(const Scenario& scenario, const PolicySource& policy, std::uint64_t seed,
                std::uint64_t stream) {
  const Engine engine(scenario, policy);
  return run_one(engine, scenario, seed, stream);
}

double recompute_cost(const Scenario& scenario, const Rollout& r) {
  const QuadraticCostSchedule& c = scenario.scoring_costs();
  double cost = 0.0;
  for (std::size_t i = 0; i < r.actions.size(); ++i) {
    const int k = static_cast<int>(i) + 1;
    const Vector& x = r.states.at(i);
    cost += quad_form(c.stage(r.alphas.at(i), k), x);
    if (r.actions[i].human) cost += quad_form(c.human_takeover(k), x);
    if (r.actions[i].autonomous) cost += quad_form(c.autonomous_takeover(k), x);
  }
  if (!r.diverged) cost += quad_form(c.terminal(r.alphas.back()), r.states.back());
  return cost;
}

unsigned default_worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("FLIPCOOP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(cap, &end, 10);
    if (end != cap && *end == '\0' && v >= 1) n = std::min(n, static_cast<unsigned>(v));
  }
  return n;
}

RolloutStats monte_carlo(const Scenario& scenario, const PolicySource& policy, std::size_t n,
                         std::uint64_t root_seed, unsigned threads) {
  if (n == 0) throw SolverError(kModule, "monte_carlo needs at least one rollout");
  const Engine engine(scenario, policy);
  const int L = scenario.horizon.steps();
  const auto slots = static_cast<std::size_t>(L + 1);

  std::vector<double> costs(n);
  std::vector<std::size_t> diverged(n);  // step of divergence, 0 if none
  // Row i: 1 where alpha_k = H, one slot per k; length of the recorded sequence.
  std::vector<std::uint8_t> in_h(n * slots, 0);
  std::vector<std::size_t> recorded(n);

  const auto work = [&](std::size_t i) {
    RandomStream rng(root_seed, i);
    std::uint8_t* row = in_h.data() + i * slots;
    std::size_t j = 0;
    const auto [cost, diverged_at] = simulate(
        engine, scenario, rng,
        [&](const Vector&, FlipDynState a) { row[j++] = a == FlipDynState::kHuman; },
        [](TakeoverAction) {});
    costs[i] = cost;
    diverged[i] = static_cast<std::size_t>(diverged_at);
    recorded[i] = j;
  };

  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(threads == 0 ? default_worker_count() : threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) work(i);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // Fixed index order from here on.
  RolloutStats stats;
  stats.n = n;
  stats.divergent_at.assign(static_cast<std::size_t>(L), 0);
  std::size_t m = 0;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diverged[i] != 0) {
      ++stats.n_divergent;
      ++stats.divergent_at[diverged[i] - 1];
      continue;
    }
    ++m;
    const double delta = costs[i] - mean;
    mean += delta / static_cast<double>(m);
    m2 += delta * (costs[i] - mean);
  }
  stats.mean_cost = m > 0 ? mean : std::nan("");
  stats.std_error = m > 1 ? std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m))
                          : 0.0;
  stats.alpha_occupancy.assign(slots, 0.0);
  for (std::size_t j = 0; j < slots; ++j) {
    std::size_t hits = 0;
    std::size_t reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (j >= recorded[i]) continue;
      ++reach;
      hits += in_h[i * slots + j];
    }
    stats.alpha_occupancy[j] =
        reach > 0 ? static_cast<double>(hits) / static_cast<double>(reach) : 0.0;
  }
  return stats;
}

double forward_expected_cost(const Scenario& scenario, const PolicySource& policy,
                             std::size_t max_atoms) {
  const Engine engine(scenario, policy);
  const int L = scenario.horizon.steps();
  const auto key_of = [](FlipDynState alpha, const Vector& x) {
    return AtomKey{alpha, std::vector<double>(x.data(), x.data() + x.size())};
  };
  std::map<AtomKey, double> atoms{{key_of(scenario.alpha1, scenario.x1), 1.0}};
  double expected = 0.0;
  for (int k = 1; k <= L; ++k) {
    std::map<AtomKey, double> next;
    const double p = scenario.intent.at(k);
    for (const auto& [key, mass] : atoms) {
      const Vector x = Eigen::Map<const Vector>(key.x.data(), static_cast<Eigen::Index>(key.x.size()));
      for (const auto& [action, w] : engine.action_distribution(x, k, key.alpha)) {
        expected += mass * w * engine.step_cost(x, key.alpha, action, k);
        const StateDistribution d = flipdyn_transition_dist(key.alpha, action, p);
        for (FlipDynState s : kFlipDynStates) {
          if (d[s] <= 0.0) continue;
          Vector xn(x.size());
          engine.advance(x, s, k, xn);
          if (diverged_state(xn)) {
            throw SolverError(kModule, "state diverges under the policy", k);
          }
          next[key_of(s, xn)] += mass * w * d[s];
        }
      }
    }
    if (next.size() > max_atoms) {
      throw SolverError(kModule, "forward propagation exceeds " + std::to_string(max_atoms) +
                                     " atoms", k);
    }
    atoms = std::move(next);
  }
  for (const auto& [key, mass] : atoms) {
    const Vector x = Eigen::Map<const Vector>(key.x.data(), static_cast<Eigen::Index>(key.x.size()));
    expected += mass * engine.terminal_cost(x, key.alpha);
  }
  return expected;
}

double behavioral_expected_cost(const Scenario& scenario, const BehavioralStrategy& strategy) {
  const int L = scenario.horizon.steps();
  if (strategy.steps() != L) {
    throw SolverError(kModule, "strategy covers " + std::to_string(strategy.steps()) +
                                   " steps, horizon is " + std::to_string(L));
  }
  const ClosedLoopPair loops = scenario.closed_loops();
  const QuadraticCostSchedule& c = scenario.scoring_costs();
  std::array<Matrix, 2> J = {c.G_H_terminal, c.G_A_terminal};
  for (int k = L; k >= 1; --k) {
    std::array<Matrix, 2> carried;
    for (FlipDynState s : kFlipDynStates) {
      carried[index_of(s)] = loops.under(s, k).transpose() * J[index_of(s)] * loops.under(s, k);
    }
    std::array<Matrix, 2> Jk;
    for (FlipDynState alpha : kFlipDynStates) {
      const double beta = strategy.beta(k, alpha);
      const double gamma = strategy.gamma(k, alpha);
      Matrix acc = c.stage(alpha, k);
      for (const TakeoverAction& a : kAllActions) {
        const double w = (a.human ? beta : 1.0 - beta) * (a.autonomous ? gamma : 1.0 - gamma);
        if (w == 0.0) continue;
        Matrix branch = Matrix::Zero(acc.rows(), acc.cols());
        if (a.human) branch += c.human_takeover(k);
        if (a.autonomous) branch += c.autonomous_takeover(k);
        const StateDistribution d = flipdyn_transition_dist(alpha, a, scenario.intent.at(k));
        for (FlipDynState s : kFlipDynStates) {
          if (d[s] > 0.0) branch += d[s] * carried[index_of(s)];
        }
        acc += w * branch;
      }
      Jk[index_of(alpha)] = 0.5 * (acc + acc.transpose());
    }
    J = std::move(Jk);
  }
  return quad_form(J[index_of(scenario.alpha1)], scenario.x1);
}

PolicySource solve_scenario(const Scenario& scenario, SelectionRule rule,
                            const PotentialOptions& options) {
  scenario.validate();
  const ClosedLoopPair loops = scenario.closed_loops();
  if (scenario.has_agent_costs()) {
    return PotentialPolicy{
        solve_potential_recursion(loops, scenario.agent_costs(), scenario.horizon, options)};
  }
  return LqPolicy{solve_lq_recursion(loops, std::get<QuadraticCostSchedule>(scenario.costs),
                                     scenario.intent, scenario.horizon, rule),
                  rule};
}

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Scenario scalar_base(std::string label, double p, CostSource costs,
                     Horizon horizon) {
  const int L = horizon.steps();
  const auto n = static_cast<std::size_t>(L);
  const double dt = 0.1;
  return Scenario{std::move(label),
                  LinearSystem::time_invariant(scalar(1.0), scalar(-0.9 * dt), scalar(-0.6 * dt),
                                               horizon),
                  FeedbackGains{std::vector<Matrix>(n, scalar(1.0)),
                                std::vector<Matrix>(n, scalar(1.0))},
                  std::move(costs),
                  IntentSchedule::constant(p, horizon),
                  horizon,
                  Vector::Ones(1),
                  FlipDynState::kAutonomous};
}

QuadraticCostSchedule scalar_costs(double g_h, double g_a, double h, double a, Horizon horizon) {
  return QuadraticCostSchedule::time_invariant(scalar(g_h), scalar(g_a), scalar(h), scalar(a),
                                               horizon);
}

}  // namespace

Scenario scalar_lti_scenario(double p) {
  check_probability(p, "scalar scenario intent");
  const Horizon horizon(30);
  std::ostringstream label;
  label << "scalar-lti p=" << p;
  return scalar_base(label.str(), p, scalar_costs(1.2, 1.0, 0.35, 0.2, horizon), horizon);
}

Scenario potential_aligned_scenario() {
  const Horizon horizon(30);
  // Same stage costs and human takeover weight; the agents only disagree on
  // the price of an autonomous request.
  return scalar_base("potential-aligned", 1.0,
                     AgentCostSchedules{scalar_costs(1.2, 1.0, 0.35, 0.2, horizon),
                                        scalar_costs(1.2, 1.0, 0.35, 0.5, horizon)},
                     horizon);
}

Scenario potential_misaligned_scenario() {
  const Horizon horizon(30);
  // Autonomous control is costlier, so the human takes over, and the agents
  // price that takeover differently.
  return scalar_base("potential-misaligned", 1.0,
                     AgentCostSchedules{scalar_costs(1.0, 1.6, 0.35, 0.2, horizon),
                                        scalar_costs(1.0, 1.6, 0.1, 0.2, horizon)},
                     horizon);
}

VehicleCase parse_vehicle_case(std::string_view text) {
  if (text == "a") return VehicleCase::kA;
  if (text == "b") return VehicleCase::kB;
  throw DomainError("vehicle case must be \"a\" or \"b\", got \"" + std::string(text) + "\"");
}

std::string_view to_string(VehicleCase c) { return c == VehicleCase::kA ? "a" : "b"; }

namespace {

struct VehicleParams {
  std::map<std::string, double> v;

  double get(const std::string& key) const { return v.at(key); }
  int count(const std::string& key) const {
    const double x = get(key);
    if (!(x >= 1.0) || x != std::floor(x) || x > 100000.0) {
      throw DomainError("override \"" + key + "\" must be a positive integer");
    }
    return static_cast<int>(x);
  }
};

VehicleParams vehicle_defaults(VehicleCase c) {
  VehicleParams p;
  p.v = {
      {"dt", 0.1},
      {"speed", 5.0},
      {"w", 0.7},
      {"segment_1", 20},
      {"segment_2", 20},
      {"segment_3", 20},
      {"q_cross", 1.0},
      {"q_heading", 0.5},
      {"cost_base", 0.5},
      {"cost_peak", 5.0},
      {"autonomous_ratio", 0.3},
      {"takeover_human", 2.0},
      {"takeover_autonomous", 0.5},
      {"intent_low", 0.1},
      {"intent_high", 0.8},
      {"effort_human", 1.0},
      {"effort_autonomous", 1.0},
      {"x1_cross", 1.0},
      {"x1_heading", 0.0},
      {"alpha1", 1.0},
  };
  if (c == VehicleCase::kB) {
    // Cheap takeovers and a smaller cost gap: the human's faster loop wins.
    p.v["cost_base"] = 1.0;
    p.v["cost_peak"] = 6.0;
    p.v["autonomous_ratio"] = 0.8;
    p.v["takeover_human"] = 0.3;
    p.v["takeover_autonomous"] = 0.3;
  }
  return p;
}

/// Rise over the first segment, hold on the second, fall over the third.
std::vector<double> trapezoid(int s1, int s2, int s3, double low, double high) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(s1 + s2 + s3));
  for (int i = 0; i < s1; ++i) out.push_back(low + (high - low) * i / std::max(1, s1 - 1));
  for (int i = 0; i < s2; ++i) out.push_back(high);
  for (int i = 0; i < s3; ++i) out.push_back(high - (high - low) * (i + 1) / s3);
  return out;
}

}  // namespace

std::vector<std::string> vehicle_override_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : vehicle_defaults(VehicleCase::kA).v) keys.push_back(k);
  return keys;
}

Scenario vehicle_tracking_scenario(VehicleCase c, const std::map<std::string, double>& overrides) {
  VehicleParams p = vehicle_defaults(c);
  for (const auto& [key, value] : overrides) {
    const auto it = p.v.find(key);
    if (it == p.v.end()) throw DomainError("unknown vehicle override \"" + key + "\"");
    if (!std::isfinite(value)) throw DomainError("override \"" + key + "\" must be finite");
    it->second = value;
  }
  for (const char* key : {"q_cross", "q_heading", "cost_base", "cost_peak", "autonomous_ratio",
                          "takeover_human", "takeover_autonomous"}) {
    if (p.get(key) < 0.0) throw DomainError(std::string("override \"") + key + "\" must be >= 0");
  }
  for (const char* key : {"dt", "speed", "effort_human", "effort_autonomous"}) {
    if (!(p.get(key) > 0.0)) throw DomainError(std::string("override \"") + key + "\" must be > 0");
  }
  if (p.get("autonomous_ratio") > 1.0) {
    throw DomainError("override \"autonomous_ratio\" must be <= 1 (human costs dominate)");
  }
  if (p.get("alpha1") != 0.0 && p.get("alpha1") != 1.0) {
    throw DomainError("override \"alpha1\" must be 0 (H) or 1 (A)");
  }

  const int s1 = p.count("segment_1");
  const int s2 = p.count("segment_2");
  const int s3 = p.count("segment_3");
  const Horizon horizon(s1 + s2 + s3);
  const double dt = p.get("dt");
  const double v = p.get("speed");

  Matrix E(2, 2);
  E << 1.0, v * dt,
       0.0, 1.0;
  Matrix B(2, 1);
  B << 0.5 * v * dt * dt, dt;
  const Matrix C = p.get("w") * B;

  const std::vector<double> scale =
      trapezoid(s1, s2, s3, p.get("cost_base"), p.get("cost_peak"));
  const std::vector<double> intent =
      trapezoid(s1, s2, s3, p.get("intent_low"), p.get("intent_high"));
  const Matrix Q = Eigen::Vector2d(p.get("q_cross"), p.get("q_heading")).asDiagonal();
  const Matrix I = Matrix::Identity(2, 2);

  QuadraticCostSchedule costs;
  for (double s : scale) {
    costs.G_H.push_back(s * Q);
    costs.G_A.push_back(p.get("autonomous_ratio") * s * Q);
    costs.H.push_back(p.get("takeover_human") * I);
    costs.A.push_back(p.get("takeover_autonomous") * I);
  }
  costs.G_H_terminal = costs.G_H.back();
  costs.G_A_terminal = costs.G_A.back();

  Scenario sc{"vehicle-" + std::string(to_string(c)),
              LinearSystem::time_invariant(E, B, C, horizon),
              GainSynthesis{scalar(p.get("effort_human")), scalar(p.get("effort_autonomous"))},
              costs,
              IntentSchedule(intent),
              horizon,
              Eigen::Vector2d(p.get("x1_cross"), p.get("x1_heading")),
              p.get("alpha1") == 0.0 ? FlipDynState::kHuman : FlipDynState::kAutonomous};
  sc.validate();
  return sc;
}

StateId Discretization::locate(double x) const {
  const auto it = std::lower_bound(grid.begin(), grid.end(), x);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const auto hi = static_cast<StateId>(it - grid.begin());
  return (x - grid[hi - 1] <= grid[hi] - x) ? hi - 1 : hi;
}

Discretization discretize_scalar(const Scenario& scenario, std::size_t points, double extent) {
  if (scenario.system.state_dim() != 1) {
    throw SolverError(kModule, "discretize_scalar needs a scalar system");
  }
  if (points < 2 || !(extent > 0.0)) {
    throw SolverError(kModule, "discretization needs >= 2 points and a positive extent");
  }
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = -extent + 2.0 * extent * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  const ClosedLoopPair loops = scenario.closed_loops();
  const int L = scenario.horizon.steps();
  Discretization d{grid, FiniteGameSpec(1, {std::vector<StateId>(1, 0)},
                                        {std::vector<StateId>(1, 0)},
                                        StageCostEvaluators<StateId>{
                                            [](const StateId&, FlipDynState, int) { return 0.0; },
                                            [](const StateId&, FlipDynState) { return 0.0; },
                                            [](const StateId&, int) { return 0.0; },
                                            [](const StateId&, int) { return 0.0; }},
                                        IntentSchedule({0.0}), Horizon(1))};
  std::vector<std::vector<StateId>> step_h(static_cast<std::size_t>(L));
  std::vector<std::vector<StateId>> step_a(static_cast<std::size_t>(L));
  for (int k = 1; k <= L; ++k) {
    for (double x : grid) {
      step_h[static_cast<std::size_t>(k - 1)].push_back(d.locate(loops.human(k)(0, 0) * x));
      step_a[static_cast<std::size_t>(k - 1)].push_back(d.locate(loops.autonomous(k)(0, 0) * x));
    }
  }
  const QuadraticCostSchedule& c = scenario.scoring_costs();
  const auto sq = [grid](StateId i) { return grid[i] * grid[i]; };
  StageCostEvaluators<StateId> eval{
      [&c, sq](const StateId& i, FlipDynState s, int k) { return c.stage(s, k)(0, 0) * sq(i); },
      [&c, sq](const StateId& i, FlipDynState s) { return c.terminal(s)(0, 0) * sq(i); },
      [&c, sq](const StateId& i, int k) { return c.human_takeover(k)(0, 0) * sq(i); },
      [&c, sq](const StateId& i, int k) { return c.autonomous_takeover(k)(0, 0) * sq(i); }};
  d.spec = FiniteGameSpec(points, std::move(step_h), std::move(step_a), eval, scenario.intent,
                          scenario.horizon);
  return d;
}

}  // namespace flipcoop
