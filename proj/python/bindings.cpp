#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flipcoop/cli.hpp"
#include "flipcoop/core.hpp"
#include "flipcoop/matrix_game.hpp"
#include "flipcoop/sim.hpp"

namespace py = pybind11;
using namespace flipcoop;

namespace {

py::dict equilibrium(const StepEquilibrium& e) {
  py::dict d;
  d["beta"] = static_cast<int>(e.action.human);
  d["gamma"] = static_cast<int>(e.action.autonomous);
  d["continuation"] = e.continuation;
  d["branch"] = std::string(to_string(e.branch));
  return d;
}

std::vector<double> scalar_entries(const std::vector<Matrix>& ms) {
  std::vector<double> out;
  out.reserve(ms.size());
  for (const Matrix& m : ms) out.push_back(m(0, 0));
  return out;
}

std::vector<std::string> branch_names(const std::vector<StepBranch>& bs) {
  std::vector<std::string> out;
  for (StepBranch b : bs) out.emplace_back(to_string(b));
  return out;
}

}  // namespace

PYBIND11_MODULE(_flipcoop, m) {
  m.doc() = "Takeover games between a human and an autonomous agent";
  m.attr("__version__") = std::string(tool_version());

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

  m.def(
      "transition",
      [](const std::string& alpha, bool human, bool autonomous, double p) {
        const StateDistribution d =
            flipdyn_transition_dist(parse_flipdyn_state(alpha), {human, autonomous}, p);
        return py::make_tuple(d.human, d.autonomous);
      },
      py::arg("alpha"), py::arg("human"), py::arg("autonomous"), py::arg("p"),
      "(P[H], P[A]) of the next authority state.");

  m.def("build_xi_h", &build_xi_h, py::arg("v_h"), py::arg("v_a"), py::arg("h"), py::arg("a"));
  m.def("build_xi_a", &build_xi_a, py::arg("v_h"), py::arg("v_a"), py::arg("h"), py::arg("a"),
        py::arg("p"));
  m.def(
      "ne_select_h",
      [](double vh, double va, double h, double a) { return equilibrium(ne_select_h(vh, va, h, a)); },
      py::arg("v_h"), py::arg("v_a"), py::arg("h"), py::arg("a"));
  m.def(
      "ne_select_a",
      [](double vh, double va, double h, double a, double p, const std::string& rule) {
        return equilibrium(ne_select_a(vh, va, h, a, p, parse_selection_rule(rule)));
      },
      py::arg("v_h"), py::arg("v_a"), py::arg("h"), py::arg("a"), py::arg("p"),
      py::arg("rule") = "admissible");

  m.def(
      "solve_scalar_lti",
      [](double p, const std::string& rule) {
        const Scenario sc = scalar_lti_scenario(p);
        const RiccatiPair pair = solve_lq_recursion(sc.closed_loops(), sc.scoring_costs(), sc.intent,
                                                    sc.horizon, parse_selection_rule(rule));
        py::dict d;
        d["P_H"] = scalar_entries(pair.P_H);
        d["P_A"] = scalar_entries(pair.P_A);
        d["branch_H"] = branch_names(pair.branch_H);
        d["branch_A"] = branch_names(pair.branch_A);
        return d;
      },
      py::arg("p"), py::arg("rule") = "admissible",
      "Riccati-pair values (k = 1..L+1) and branches (k = 1..L) of the scalar preset.");

  m.def(
      "simulate_scalar_lti",
      [](double p, std::size_t n, std::uint64_t seed, unsigned threads) {
        const Scenario sc = scalar_lti_scenario(p);
        const PolicySource policy = solve_scenario(sc);
        RolloutStats st;
        {
          py::gil_scoped_release release;
          st = monte_carlo(sc, policy, n, seed, threads);
        }
        py::dict d;
        d["n"] = st.n;
        d["n_divergent"] = st.n_divergent;
        d["mean_cost"] = st.mean_cost;
        d["std_error"] = st.std_error;
        d["h_occupancy"] = st.alpha_occupancy;
        d["exact_expectation"] = forward_expected_cost(sc, policy);
        return d;
      },
      py::arg("p"), py::arg("n"), py::arg("seed") = 0, py::arg("threads") = 0);

  m.def(
      "normalize_config", [](const std::string& text) { return render_config(parse_config(text)); },
      py::arg("text"), "Parse and re-render a run configuration in canonical form.");

  m.def(
      "run_config",
      [](const std::string& text, const std::string& out_dir) {
        RunConfig c = parse_config(text);
        c.output_dir = out_dir;
        std::string diagnostics;
        int code;
        {
          py::gil_scoped_release release;
          code = execute(c, diagnostics);
        }
        return py::make_tuple(code, diagnostics);
      },
      py::arg("text"), py::arg("out_dir"), "Run a configuration; returns (exit code, diagnostics).");

  m.def("presets", &preset_names);
}
