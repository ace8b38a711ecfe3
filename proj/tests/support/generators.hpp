#pragma once

// Hand-rolled random instance generators shared by the unit and acceptance
// suites. Everything is driven by an explicit seed.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "flipcoop/general_solver.hpp"
#include "flipcoop/lq_solver.hpp"
#include "flipcoop/potential_solver.hpp"

namespace flipcoop::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  bool coin() { return integer(0, 1) == 1; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
  }
  /// Multiple of 1/8 in [lo, hi]; exact in binary floating point.
  double dyadic(int lo, int hi) { return integer(lo * 8, hi * 8) / 8.0; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct FiniteGameShape {
  int max_steps = 3;
  int max_states = 5;
  int max_cost = 10;
  std::vector<double> intents = {0.0, 0.25, 0.5, 1.0};
};

/// Integer costs in [0, max_cost]; intent per step drawn from `intents`.
inline FiniteGameSpec random_finite_game(Gen& g, const FiniteGameShape& shape = {}) {
  const int L = g.integer(1, shape.max_steps);
  const auto n = static_cast<std::size_t>(g.integer(1, shape.max_states));
  const auto L_ = static_cast<std::size_t>(L);
  std::vector<std::vector<StateId>> step_h(L_), step_a(L_);
  std::vector<std::vector<std::array<double, 2>>> stage(L_);
  std::vector<std::vector<double>> human(L_), autonomous(L_);
  std::vector<std::array<double, 2>> terminal(n);
  std::vector<double> intent;
  const auto cost = [&] { return static_cast<double>(g.integer(0, shape.max_cost)); };
  for (std::size_t k = 0; k < L_; ++k) {
    for (std::size_t x = 0; x < n; ++x) {
      step_h[k].push_back(static_cast<StateId>(g.integer(0, static_cast<int>(n) - 1)));
      step_a[k].push_back(static_cast<StateId>(g.integer(0, static_cast<int>(n) - 1)));
      stage[k].push_back({cost(), cost()});
      human[k].push_back(cost());
      autonomous[k].push_back(cost());
    }
    intent.push_back(g.pick(shape.intents));
  }
  for (auto& t : terminal) t = {cost(), cost()};
  return FiniteGameSpec(
      n, std::move(step_h), std::move(step_a),
      StageCostEvaluators<StateId>{
          [&](const StateId& x, FlipDynState s, int k) {
            return stage[static_cast<std::size_t>(k - 1)][x][index_of(s)];
          },
          [&](const StateId& x, FlipDynState s) { return terminal[x][index_of(s)]; },
          [&](const StateId& x, int k) { return human[static_cast<std::size_t>(k - 1)][x]; },
          [&](const StateId& x, int k) { return autonomous[static_cast<std::size_t>(k - 1)][x]; }},
      IntentSchedule(intent), Horizon(L));
}

/// Symmetric positive definite, entries of moderate size.
inline Matrix random_spd(Gen& g, Eigen::Index n, double floor = 0.05) {
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = g.real(-1.0, 1.0);
  }
  Matrix s = m * m.transpose() + floor * Matrix::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

/// Contracting-ish closed loop: random entries scaled to spectral radius < 1.
inline Matrix random_loop(Gen& g, Eigen::Index n) {
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = g.real(-1.0, 1.0);
  }
  const double norm = m.operatorNorm();
  return m * (g.real(0.5, 0.98) / std::max(norm, 1e-9));
}

inline ClosedLoopPair random_loops(Gen& g, Eigen::Index n, int steps, bool time_varying = false) {
  ClosedLoopPair loops;
  const Matrix b = random_loop(g, n);
  const Matrix c = random_loop(g, n);
  for (int k = 0; k < steps; ++k) {
    loops.btilde.push_back(time_varying ? random_loop(g, n) : b);
    loops.ctilde.push_back(time_varying ? random_loop(g, n) : c);
  }
  return loops;
}

inline QuadraticCostSchedule random_costs(Gen& g, Eigen::Index n, int steps,
                                          bool time_varying = false) {
  QuadraticCostSchedule c;
  const Matrix gh = random_spd(g, n), ga = random_spd(g, n);
  const Matrix h = random_spd(g, n), a = random_spd(g, n);
  for (int k = 0; k < steps; ++k) {
    c.G_H.push_back(time_varying ? random_spd(g, n) : gh);
    c.G_A.push_back(time_varying ? random_spd(g, n) : ga);
    c.H.push_back(time_varying ? random_spd(g, n) : h);
    c.A.push_back(time_varying ? random_spd(g, n) : a);
  }
  c.G_H_terminal = random_spd(g, n);
  c.G_A_terminal = random_spd(g, n);
  return c;
}

/// Nonnegative dyadic agent terms; the autonomous agent's alpha = H value
/// gap is forced equal to the human agent's so an exact potential exists.
inline std::pair<AgentTerms, AgentTerms> random_potential_terms(Gen& g, FlipDynState alpha) {
  AgentTerms hd{g.dyadic(0, 20), g.dyadic(0, 20), g.dyadic(0, 5), g.dyadic(0, 5)};
  AgentTerms ad{g.dyadic(0, 20), 0.0, g.dyadic(0, 5), g.dyadic(0, 5)};
  if (alpha == FlipDynState::kHuman) {
    ad.v_a_next = ad.v_h_next + (hd.v_a_next - hd.v_h_next);
  } else {
    ad.v_a_next = g.dyadic(0, 20);
  }
  return {hd, ad};
}

}  // namespace flipcoop::testing
