#include "flipcoop/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#ifndef FLIPCOOP_VERSION
#define FLIPCOOP_VERSION "0.0.0"
#endif

namespace flipcoop {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Schema helpers

std::string type_name(const json& j) {
  if (j.is_null()) return "null";
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  return "object";
}

[[noreturn]] void bad(const std::string& path, const std::string& expected, const json& got) {
  throw ConfigError("key \"" + path + "\": expected " + expected + ", got " + type_name(got));
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Object reader that rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_.empty() ? "<document>" : path_, "an object", j_);
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return join(path_, key); }

  const json* get(const std::string& key) {
    allowed_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& need(const std::string& key) {
    const json* v = get(key);
    if (v == nullptr) throw ConfigError("key \"" + path(key) + "\" is required");
    return *v;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (allowed_.count(key) == 0) throw ConfigError("unknown key \"" + path(key) + "\"");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> allowed_;
};

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "a number", j);
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "a finite number", j);
  return v;
}

double as_probability(const json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (!(v >= 0.0 && v <= 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "key \"" << path << "\": probability " << v << " outside [0, 1]";
    throw ConfigError(os.str());
  }
  return v;
}

std::uint64_t as_count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  bad(path, "a nonnegative integer", j);
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "a string", j);
  return j.get<std::string>();
}

Matrix as_matrix(const json& j, const std::string& path) {
  if (j.is_number()) return Matrix::Constant(1, 1, as_number(j, path));
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    bad(path, "a matrix (array of rows)", j);
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  if (cols == 0) bad(path, "a matrix with at least one column", j);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("key \"" + rp + "\": expected a row of " + std::to_string(cols) +
                        " numbers");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = as_number(row[static_cast<std::size_t>(c)], rp + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

bool is_matrix_sequence(const json& j) {
  return j.is_array() && !j.empty() && j.front().is_array() && !j.front().empty() &&
         j.front().front().is_array();
}

/// A single matrix (held constant) or one matrix per step.
std::vector<Matrix> as_schedule(const json& j, const std::string& path, int steps) {
  if (is_matrix_sequence(j)) {
    if (static_cast<int>(j.size()) != steps) {
      throw ConfigError("key \"" + path + "\": expected " + std::to_string(steps) +
                        " per-step matrices, got " + std::to_string(j.size()));
    }
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(as_matrix(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }
  return std::vector<Matrix>(static_cast<std::size_t>(steps), as_matrix(j, path));
}

Vector as_vector(const json& j, const std::string& path) {
  if (j.is_number()) return Vector::Constant(1, as_number(j, path));
  if (!j.is_array() || j.empty()) bad(path, "a nonempty array of numbers", j);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

IntentSchedule as_intent(const json& j, const std::string& path, int steps) {
  if (j.is_number()) return IntentSchedule::constant(as_probability(j, path), Horizon(steps));
  if (!j.is_array()) bad(path, "a probability or an array of probabilities", j);
  if (static_cast<int>(j.size()) != steps) {
    throw ConfigError("key \"" + path + "\": expected " + std::to_string(steps) + " entries, got " +
                      std::to_string(j.size()));
  }
  std::vector<double> p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    p.push_back(as_probability(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return IntentSchedule(std::move(p));
}

FlipDynState as_state(const json& j, const std::string& path) {
  const std::string s = as_string(j, path);
  if (s == "H") return FlipDynState::kHuman;
  if (s == "A") return FlipDynState::kAutonomous;
  throw ConfigError("key \"" + path + "\": expected \"H\" or \"A\", got \"" + s + "\"");
}

int as_horizon(const json& j, const std::string& path) {
  const std::uint64_t L = as_count(j, path);
  if (L < 1 || L > 100000) throw ConfigError("key \"" + path + "\": horizon must be in 1..100000");
  return static_cast<int>(L);
}

QuadraticCostSchedule as_costs(const json& j, const std::string& path, int steps) {
  Fields f(j, path);
  QuadraticCostSchedule c;
  c.G_H = as_schedule(f.need("G_H"), f.path("G_H"), steps);
  c.G_A = as_schedule(f.need("G_A"), f.path("G_A"), steps);
  c.H = as_schedule(f.need("H"), f.path("H"), steps);
  c.A = as_schedule(f.need("A"), f.path("A"), steps);
  const json* th = f.get("G_H_terminal");
  const json* ta = f.get("G_A_terminal");
  c.G_H_terminal = th ? as_matrix(*th, f.path("G_H_terminal")) : c.G_H.back();
  c.G_A_terminal = ta ? as_matrix(*ta, f.path("G_A_terminal")) : c.G_A.back();
  f.finish();
  return c;
}

Scenario scenario_from_json(const json& j) {
  const std::string path = "scenario";
  Fields f(j, path);
  const int L = as_horizon(f.need("horizon"), f.path("horizon"));
  const Horizon horizon(L);
  const json* label = f.get("label");
  LinearSystem sys{as_schedule(f.need("E"), f.path("E"), L),
                   as_schedule(f.need("B"), f.path("B"), L),
                   as_schedule(f.need("C"), f.path("C"), L)};

  GainSource gains;
  {
    Fields g(f.need("gains"), f.path("gains"));
    if (g.has("synthesize")) {
      Fields s(g.need("synthesize"), g.path("synthesize"));
      gains = GainSynthesis{as_matrix(s.need("human_effort"), s.path("human_effort")),
                            as_matrix(s.need("autonomous_effort"), s.path("autonomous_effort"))};
      s.finish();
    } else {
      gains = FeedbackGains{as_schedule(g.need("K"), g.path("K"), L),
                            as_schedule(g.need("W"), g.path("W"), L)};
    }
    g.finish();
  }

  CostSource costs;
  const json* shared = f.get("costs");
  const json* agents = f.get("agent_costs");
  if ((shared == nullptr) == (agents == nullptr)) {
    throw ConfigError("key \"" + path + "\": exactly one of \"costs\" or \"agent_costs\" is required");
  }
  if (shared != nullptr) {
    costs = as_costs(*shared, f.path("costs"), L);
  } else {
    Fields a(*agents, f.path("agent_costs"));
    costs = AgentCostSchedules{as_costs(a.need("human"), a.path("human"), L),
                               as_costs(a.need("autonomous"), a.path("autonomous"), L)};
    a.finish();
  }

  const json* alpha1 = f.get("alpha1");
  Scenario s{label ? as_string(*label, f.path("label")) : "inline",
             std::move(sys),
             std::move(gains),
             std::move(costs),
             as_intent(f.need("intent"), f.path("intent"), L),
             horizon,
             as_vector(f.need("x1"), f.path("x1")),
             alpha1 ? as_state(*alpha1, f.path("alpha1")) : FlipDynState::kAutonomous};
  f.finish();
  return s;
}

struct FiniteGame {
  FiniteGameSpec spec;
  FlipDynState alpha1;
  StateId x1;
};

/// Per-state list (held constant) or one list per step.
template <class T, class Read>
std::vector<std::vector<T>> as_table(const json& j, const std::string& path, int steps,
                                     std::size_t states, Read read) {
  if (!j.is_array() || j.empty()) bad(path, "a nonempty array", j);
  const auto row = [&](const json& r, const std::string& rp) {
    if (!r.is_array() || r.size() != states) {
      throw ConfigError("key \"" + rp + "\": expected one entry per state (" +
                        std::to_string(states) + ")");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < r.size(); ++i) out.push_back(read(r[i], rp + "[" + std::to_string(i) + "]"));
    return out;
  };
  if (j.front().is_array()) {
    if (static_cast<int>(j.size()) != steps) {
      throw ConfigError("key \"" + path + "\": expected " + std::to_string(steps) +
                        " per-step rows, got " + std::to_string(j.size()));
    }
    std::vector<std::vector<T>> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(row(j[k], path + "[" + std::to_string(k) + "]"));
    return out;
  }
  return std::vector<std::vector<T>>(static_cast<std::size_t>(steps), row(j, path));
}

FiniteGame game_from_json(const json& j) {
  Fields f(j, "game");
  const std::uint64_t n = as_count(f.need("num_states"), f.path("num_states"));
  if (n < 1 || n > 1000000) throw ConfigError("key \"game.num_states\": must be in 1..1000000");
  const auto states = static_cast<std::size_t>(n);
  const int L = as_horizon(f.need("horizon"), f.path("horizon"));
  const auto read_state = [&](const json& v, const std::string& p) -> StateId {
    const std::uint64_t id = as_count(v, p);
    if (id >= n) throw ConfigError("key \"" + p + "\": state id " + std::to_string(id) + " out of range");
    return static_cast<StateId>(id);
  };
  const auto read_cost = [](const json& v, const std::string& p) {
    const double c = as_number(v, p);
    if (c < 0.0) throw ConfigError("key \"" + p + "\": costs must be nonnegative");
    return c;
  };
  auto step_h = as_table<StateId>(f.need("step_h"), f.path("step_h"), L, states, read_state);
  auto step_a = as_table<StateId>(f.need("step_a"), f.path("step_a"), L, states, read_state);
  const auto stage_h = as_table<double>(f.need("stage_h"), f.path("stage_h"), L, states, read_cost);
  const auto stage_a = as_table<double>(f.need("stage_a"), f.path("stage_a"), L, states, read_cost);
  const auto human = as_table<double>(f.need("human_takeover"), f.path("human_takeover"), L, states, read_cost);
  const auto autonomous = as_table<double>(f.need("autonomous_takeover"), f.path("autonomous_takeover"), L, states, read_cost);
  const auto term_h = as_table<double>(f.need("terminal_h"), f.path("terminal_h"), 1, states, read_cost);
  const auto term_a = as_table<double>(f.need("terminal_a"), f.path("terminal_a"), 1, states, read_cost);
  const IntentSchedule intent = as_intent(f.need("intent"), f.path("intent"), L);
  const json* x1 = f.get("x1");
  const json* alpha1 = f.get("alpha1");
  FiniteGame g{FiniteGameSpec(states, std::move(step_h), std::move(step_a),
                              StageCostEvaluators<StateId>{
                                  [&](const StateId& x, FlipDynState s, int k) {
                                    const auto& t = s == FlipDynState::kHuman ? stage_h : stage_a;
                                    return t[static_cast<std::size_t>(k - 1)][x];
                                  },
                                  [&](const StateId& x, FlipDynState s) {
                                    return (s == FlipDynState::kHuman ? term_h : term_a)[0][x];
                                  },
                                  [&](const StateId& x, int k) {
                                    return human[static_cast<std::size_t>(k - 1)][x];
                                  },
                                  [&](const StateId& x, int k) {
                                    return autonomous[static_cast<std::size_t>(k - 1)][x];
                                  }},
                              intent, Horizon(L)),
               alpha1 ? as_state(*alpha1, f.path("alpha1")) : FlipDynState::kAutonomous,
               x1 ? read_state(*x1, f.path("x1")) : 0};
  f.finish();
  return g;
}

/// Two-state cycle with integer costs, small enough for the oracle.
const json& finite_demo_game() {
  static const json g = json::parse(R"({
    "num_states": 2,
    "horizon": 3,
    "step_h": [1, 0],
    "step_a": [0, 0],
    "stage_h": [[3, 1], [2, 2], [1, 4]],
    "stage_a": [[1, 2], [4, 1], [2, 3]],
    "human_takeover": [1, 2],
    "autonomous_takeover": [2, 1],
    "terminal_h": [1, 3],
    "terminal_a": [2, 1],
    "intent": [0.5, 0.25, 1],
    "x1": 0,
    "alpha1": "A"
  })");
  return g;
}

bool preset_is_finite(const std::string& p) { return p == "finite-demo"; }
bool preset_is_vehicle(const std::string& p) { return p == "vehicle-a" || p == "vehicle-b"; }

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kSolveLq: return "solve-lq";
    case Mode::kSolveGeneral: return "solve-general";
    case Mode::kSolvePotential: return "solve-potential";
    case Mode::kSimulate: return "simulate";
    case Mode::kSweep: return "sweep";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::kSolveLq, Mode::kSolveGeneral, Mode::kSolvePotential, Mode::kSimulate,
                 Mode::kSweep}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown mode \"" + std::string(text) +
                    "\" (expected solve-lq, solve-general, solve-potential, simulate or sweep)");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"scalar-lti",        "vehicle-a",
                                                 "vehicle-b",         "potential-aligned",
                                                 "potential-misaligned", "finite-demo"};
  return names;
}

Scenario build_scenario(const RunConfig& config, std::optional<double> p_override) {
  const std::optional<double> p = p_override ? p_override : config.p;
  if (config.preset.empty()) {
    if (config.scenario.is_null()) throw ConfigError("no continuous scenario configured");
    Scenario s = scenario_from_json(config.scenario);
    if (p_override) s.intent = IntentSchedule::constant(*p_override, s.horizon);
    return s;
  }
  const std::string& name = config.preset;
  if (name == "scalar-lti") {
    if (!p) throw ConfigError("key \"p\" is required for the scalar-lti preset");
    return scalar_lti_scenario(*p);
  }
  if (preset_is_vehicle(name)) {
    return vehicle_tracking_scenario(name == "vehicle-a" ? VehicleCase::kA : VehicleCase::kB,
                                     config.overrides);
  }
  if (name == "potential-aligned") return potential_aligned_scenario();
  if (name == "potential-misaligned") return potential_misaligned_scenario();
  throw ConfigError("preset \"" + name + "\" is not a continuous scenario");
}

namespace {

FiniteGame build_game(const RunConfig& config) {
  if (config.preset == "finite-demo") return game_from_json(finite_demo_game());
  if (config.game.is_null()) throw ConfigError("solve-general needs \"game\" or the finite-demo preset");
  return game_from_json(config.game);
}

void validate_config(const RunConfig& c) {
  const bool finite = c.mode == Mode::kSolveGeneral;
  if (finite) {
    if (!c.scenario.is_null()) throw ConfigError("key \"scenario\": solve-general takes \"game\"");
    if (!c.preset.empty() && !preset_is_finite(c.preset)) {
      throw ConfigError("key \"scenario\": preset \"" + c.preset + "\" is not a finite game");
    }
  } else {
    if (!c.game.is_null()) throw ConfigError("key \"game\" only applies to solve-general");
    if (preset_is_finite(c.preset)) {
      throw ConfigError("key \"scenario\": preset finite-demo needs mode solve-general");
    }
    if (c.preset.empty() && c.scenario.is_null()) throw ConfigError("key \"scenario\" is required");
  }
  if (c.p && c.preset != "scalar-lti") throw ConfigError("key \"p\" only applies to the scalar-lti preset");
  if (c.p && c.mode == Mode::kSweep) throw ConfigError("key \"p\": sweep takes its values from \"sweep\"");
  if (!c.overrides.empty() && !preset_is_vehicle(c.preset)) {
    throw ConfigError("key \"overrides\" only applies to the vehicle presets");
  }
  if (c.mode == Mode::kSweep) {
    if (c.sweep.empty()) throw ConfigError("key \"sweep\" is required for mode sweep");
    if (c.preset != "scalar-lti" && !(c.preset.empty() && !c.scenario.is_null())) {
      throw ConfigError("key \"sweep\": mode sweep needs scalar-lti or an inline scenario");
    }
  } else if (!c.sweep.empty()) {
    throw ConfigError("key \"sweep\" only applies to mode sweep");
  }
  if (c.mode == Mode::kSimulate && c.n_rollouts < 1) {
    throw ConfigError("key \"n_rollouts\": simulate needs at least 1 rollout");
  }
  if (c.formats.empty()) throw ConfigError("key \"formats\": at least one format is required");
  if (!(c.existence_tolerance >= 0.0) || !std::isfinite(c.existence_tolerance)) {
    throw ConfigError("key \"existence_tolerance\": expected a finite nonnegative number");
  }
  if (c.output_dir.empty()) throw ConfigError("key \"output_dir\": must not be empty");

  // Build once so malformed scenarios fail at parse time.
  try {
    if (finite) {
      build_game(c);
      return;
    }
    const Scenario s = build_scenario(c, c.mode == Mode::kSweep ? std::optional(c.sweep.front())
                                                                : std::nullopt);
    s.validate();
    const bool agent = s.has_agent_costs();
    if (c.mode == Mode::kSolvePotential && !agent) {
      throw ConfigError("key \"scenario\": solve-potential needs per-agent costs");
    }
    if ((c.mode == Mode::kSolveLq || c.mode == Mode::kSweep) && agent) {
      throw ConfigError("key \"scenario\": " + std::string(to_string(c.mode)) +
                        " needs a shared cost schedule");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("key \"scenario\": ") + e.what());
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, std::optional<Mode> mode_hint) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  Fields f(doc, "");
  RunConfig c;

  if (const json* m = f.get("mode")) {
    c.mode = parse_mode(as_string(*m, "mode"));
    if (mode_hint && *mode_hint != c.mode) {
      throw ConfigError("key \"mode\": document says " + std::string(to_string(c.mode)) +
                        ", command line says " + std::string(to_string(*mode_hint)));
    }
  } else if (mode_hint) {
    c.mode = *mode_hint;
  } else {
    throw ConfigError("key \"mode\" is required");
  }

  if (const json* s = f.get("scenario")) {
    if (s->is_string()) {
      c.preset = s->get<std::string>();
      const auto& names = preset_names();
      if (std::find(names.begin(), names.end(), c.preset) == names.end()) {
        throw ConfigError("key \"scenario\": unknown preset \"" + c.preset + "\"");
      }
    } else if (s->is_object()) {
      c.scenario = *s;
    } else {
      bad("scenario", "a preset name or a scenario object", *s);
    }
  }
  if (const json* g = f.get("game")) {
    if (!g->is_object()) bad("game", "an object", *g);
    c.game = *g;
  }
  if (const json* p = f.get("p")) c.p = as_probability(*p, "p");
  if (const json* o = f.get("overrides")) {
    if (!o->is_object()) bad("overrides", "an object", *o);
    const auto keys = vehicle_override_keys();
    for (const auto& [key, value] : o->items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw ConfigError("unknown key \"overrides." + key + "\"");
      }
      c.overrides[key] = as_number(value, "overrides." + key);
    }
  }
  if (const json* s = f.get("sweep")) {
    if (!s->is_array()) bad("sweep", "an array of probabilities", *s);
    for (std::size_t i = 0; i < s->size(); ++i) {
      c.sweep.push_back(as_probability((*s)[i], "sweep[" + std::to_string(i) + "]"));
    }
    std::set<double> seen;
    for (double p : c.sweep) {
      if (!seen.insert(p).second) throw ConfigError("key \"sweep\": duplicate value " + shortest(p));
    }
  }
  if (const json* s = f.get("seed")) c.seed = as_count(*s, "seed");
  if (const json* n = f.get("n_rollouts")) c.n_rollouts = as_count(*n, "n_rollouts");
  if (const json* o = f.get("output_dir")) c.output_dir = as_string(*o, "output_dir");
  if (const json* fm = f.get("formats")) {
    if (!fm->is_array()) bad("formats", "an array of \"csv\" / \"json\"", *fm);
    std::set<std::string> chosen;
    for (std::size_t i = 0; i < fm->size(); ++i) {
      const std::string v = as_string((*fm)[i], "formats[" + std::to_string(i) + "]");
      if (v != "csv" && v != "json") {
        throw ConfigError("key \"formats[" + std::to_string(i) + "]\": expected \"csv\" or \"json\", got \"" + v + "\"");
      }
      chosen.insert(v);
    }
    c.formats.assign(chosen.begin(), chosen.end());
  }
  if (const json* s = f.get("selection")) {
    try {
      c.selection = parse_selection_rule(as_string(*s, "selection"));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("key \"selection\": ") + e.what());
    }
  }
  if (const json* e = f.get("existence")) {
    const std::string v = as_string(*e, "existence");
    if (v == "strict") c.existence = ExistenceMode::kStrict;
    else if (v == "record") c.existence = ExistenceMode::kRecord;
    else throw ConfigError("key \"existence\": expected \"strict\" or \"record\", got \"" + v + "\"");
  }
  if (const json* t = f.get("existence_tolerance")) {
    c.existence_tolerance = as_number(*t, "existence_tolerance");
  }
  f.finish();
  validate_config(c);
  return c;
}

std::string render_config(const RunConfig& c) {
  json doc;
  doc["mode"] = std::string(to_string(c.mode));
  if (!c.preset.empty()) doc["scenario"] = c.preset;
  else if (!c.scenario.is_null()) doc["scenario"] = c.scenario;
  if (!c.game.is_null()) doc["game"] = c.game;
  if (c.p) doc["p"] = *c.p;
  if (!c.overrides.empty()) doc["overrides"] = c.overrides;
  if (!c.sweep.empty()) doc["sweep"] = c.sweep;
  doc["seed"] = c.seed;
  doc["n_rollouts"] = c.n_rollouts;
  doc["output_dir"] = c.output_dir;
  doc["formats"] = c.formats;
  doc["selection"] = std::string(to_string(c.selection));
  doc["existence"] = c.existence == ExistenceMode::kStrict ? "strict" : "record";
  doc["existence_tolerance"] = c.existence_tolerance;
  return doc.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : render_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string_view tool_version() { return FLIPCOOP_VERSION; }

// ---------------------------------------------------------------------------
// Tables

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string render_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) out += ',';
    out += table.header[i];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) out += format_double(v);
            else if constexpr (std::is_same_v<T, long long>) out += std::to_string(v);
            else out += v;
          },
          row[i]);
    }
    out += '\n';
  }
  return out;
}

json table_json(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r = json::array();
    for (const Cell& cell : row) std::visit([&](const auto& v) { r.push_back(v); }, cell);
    rows.push_back(std::move(r));
  }
  return {{"header", table.header}, {"rows", std::move(rows)}};
}

namespace {

void add_matrix_header(std::vector<std::string>& header, const std::string& prefix,
                       Eigen::Index n) {
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      header.push_back(prefix + "_" + std::to_string(r) + std::to_string(c));
    }
  }
}

void add_matrix_cells(std::vector<Cell>& row, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.emplace_back(m(r, c));
  }
}

std::string join_warnings(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ';';
    out += p;
  }
  return out;
}

struct StepNotes {
  // Per (k, alpha) warning tags.
  std::vector<std::array<std::vector<std::string>, 2>> tags;

  explicit StepNotes(int steps) : tags(static_cast<std::size_t>(steps)) {}
  void add(int k, FlipDynState s, std::string tag) {
    tags[static_cast<std::size_t>(k - 1)][index_of(s)].push_back(std::move(tag));
  }
  std::string at(int k, FlipDynState s) const {
    return join_warnings(tags[static_cast<std::size_t>(k - 1)][index_of(s)]);
  }
  std::vector<std::string> summary() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      for (FlipDynState s : kFlipDynStates) {
        for (const auto& t : tags[i][index_of(s)]) {
          out.push_back("k=" + std::to_string(i + 1) + " alpha=" + to_char(s) + " " + t);
        }
      }
    }
    return out;
  }
};

Table policy_table(int steps, const std::function<StepBranch(int, FlipDynState)>& branch,
                   const StepNotes& notes) {
  Table t{{"k", "alpha", "beta", "gamma", "branch", "warning"}, {}};
  for (int k = 1; k <= steps; ++k) {
    for (FlipDynState s : kFlipDynStates) {
      const StepBranch b = branch(k, s);
      const TakeoverAction a = action_of(b);
      t.rows.push_back({static_cast<long long>(k), std::string(1, to_char(s)),
                        static_cast<long long>(a.human), static_cast<long long>(a.autonomous),
                        std::string(to_string(b)), notes.at(k, s)});
    }
  }
  return t;
}

json base_metadata(const RunConfig& c, const std::string& label) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(c)));
  return {{"tool", "flipcoop"},
          {"version", std::string(tool_version())},
          {"mode", std::string(to_string(c.mode))},
          {"config_hash", hash},
          {"seed", c.seed},
          {"scenario", label},
          {"selection", std::string(to_string(c.selection))}};
}

RunOutput lq_output(const RunConfig& c, const Scenario& s, const LqPolicy& pol, StepNotes& notes) {
  const RiccatiPair& pair = pol.pair;
  const int L = pair.steps();
  const Eigen::Index n = s.system.state_dim();
  RunOutput out;
  out.values.header = {"k"};
  add_matrix_header(out.values.header, "P_H", n);
  add_matrix_header(out.values.header, "P_A", n);
  for (int k = 1; k <= L + 1; ++k) {
    std::vector<Cell> row{static_cast<long long>(k)};
    add_matrix_cells(row, pair.value(FlipDynState::kHuman, k));
    add_matrix_cells(row, pair.value(FlipDynState::kAutonomous, k));
    out.values.rows.push_back(std::move(row));
  }
  for (int k = 1; k <= L; ++k) {
    const BranchWarning& w = pair.warnings[static_cast<std::size_t>(k - 1)];
    if (w.indefinite_h) notes.add(k, FlipDynState::kHuman, "indefinite");
    if (w.indefinite_a) notes.add(k, FlipDynState::kAutonomous, "indefinite");
  }
  out.metadata = base_metadata(c, s.label);
  return out;
}

RunOutput potential_output(const RunConfig& c, const Scenario& s, const PotentialPolicy& pol,
                           StepNotes& notes) {
  const QTables& q = pol.tables;
  const int L = q.steps();
  const Eigen::Index n = s.system.state_dim();
  RunOutput out;
  out.values.header = {"k"};
  add_matrix_header(out.values.header, "Q_H_Hdag", n);
  add_matrix_header(out.values.header, "Q_A_Hdag", n);
  add_matrix_header(out.values.header, "Q_H_Adag", n);
  add_matrix_header(out.values.header, "Q_A_Adag", n);
  for (int k = 1; k <= L + 1; ++k) {
    std::vector<Cell> row{static_cast<long long>(k)};
    for (Agent agent : {Agent::kHuman, Agent::kAutonomous}) {
      add_matrix_cells(row, q.value(FlipDynState::kHuman, agent, k));
      add_matrix_cells(row, q.value(FlipDynState::kAutonomous, agent, k));
    }
    out.values.rows.push_back(std::move(row));
  }
  json residuals = json::array();
  for (int k = 1; k <= L; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    if (q.warnings[i].indefinite_h) notes.add(k, FlipDynState::kHuman, "indefinite");
    if (q.warnings[i].indefinite_a) notes.add(k, FlipDynState::kAutonomous, "indefinite");
    if (q.existence_violated[i]) notes.add(k, FlipDynState::kHuman, "existence");
    residuals.push_back(q.existence_residual[i]);
  }
  out.metadata = base_metadata(c, s.label);
  out.metadata["existence_residual"] = std::move(residuals);
  return out;
}

void attach_simulation(const RunConfig& c, const Scenario& s, const PolicySource& policy,
                       RunOutput& out, StepNotes& notes) {
  const RolloutStats st = monte_carlo(s, policy, c.n_rollouts, c.seed);
  double exact = std::nan("");
  try {
    exact = forward_expected_cost(s, policy, std::size_t{1} << 16);
  } catch (const SolverError&) {
    // Too many atoms or a diverging branch; leave the column as nan.
  }
  out.stats = Table{{"n", "n_divergent", "mean_cost", "std_error", "exact_expectation"},
                    {{static_cast<long long>(st.n), static_cast<long long>(st.n_divergent),
                      st.mean_cost, st.std_error, exact}}};
  out.occupancy = Table{{"k", "h_occupancy"}, {}};
  for (std::size_t j = 0; j < st.alpha_occupancy.size(); ++j) {
    out.occupancy->rows.push_back({static_cast<long long>(j + 1), st.alpha_occupancy[j]});
  }
  for (std::size_t j = 0; j < st.divergent_at.size(); ++j) {
    if (st.divergent_at[j] == 0) continue;
    const std::string tag = "divergent:" + std::to_string(st.divergent_at[j]);
    for (FlipDynState a : kFlipDynStates) notes.add(static_cast<int>(j + 1), a, tag);
  }
  out.n_divergent = st.n_divergent;
  out.metadata["n_rollouts"] = st.n;
  out.metadata["n_divergent"] = st.n_divergent;
}

RunOutput continuous_run(const RunConfig& c, const Scenario& s, bool simulate) {
  const PolicySource policy =
      solve_scenario(s, c.selection, {c.existence, c.existence_tolerance});
  StepNotes notes(s.horizon.steps());
  RunOutput out;
  std::function<StepBranch(int, FlipDynState)> branch;
  if (const auto* lq = std::get_if<LqPolicy>(&policy)) {
    out = lq_output(c, s, *lq, notes);
    branch = [lq](int k, FlipDynState a) { return lq->pair.branch(a, k); };
  } else {
    const auto& pot = std::get<PotentialPolicy>(policy);
    out = potential_output(c, s, pot, notes);
    branch = [&pot](int k, FlipDynState a) { return pot.tables.branch(a, k); };
  }
  if (simulate) attach_simulation(c, s, policy, out, notes);
  out.policy = policy_table(s.horizon.steps(), branch, notes);
  out.warnings = notes.summary();
  out.metadata["warnings"] = out.warnings;
  out.metadata["rows"] = {{"values", out.values.rows.size()}, {"policy", out.policy.rows.size()}};
  return out;
}

RunOutput finite_run(const RunConfig& c) {
  const FiniteGame g = build_game(c);
  const FiniteGameSpec& spec = g.spec;
  const BackwardSolution sol = solve_backward(spec, c.selection);
  const int L = spec.steps();
  RunOutput out;
  out.values.header = {"k", "state", "v_H", "v_A"};
  for (int k = 1; k <= L + 1; ++k) {
    for (StateId x = 0; x < spec.num_states(); ++x) {
      out.values.rows.push_back({static_cast<long long>(k), static_cast<long long>(x),
                                 sol.values.v_h(k, x), sol.values.v_a(k, x)});
    }
  }
  out.policy.header = {"k", "state", "alpha", "beta", "gamma", "branch", "warning"};
  for (int k = 1; k <= L; ++k) {
    for (StateId x = 0; x < spec.num_states(); ++x) {
      for (FlipDynState s : kFlipDynStates) {
        const StepBranch b = sol.policy.branch(k, x, s);
        const TakeoverAction a = action_of(b);
        out.policy.rows.push_back({static_cast<long long>(k), static_cast<long long>(x),
                                   std::string(1, to_char(s)), static_cast<long long>(a.human),
                                   static_cast<long long>(a.autonomous),
                                   std::string(to_string(b)), std::string()});
      }
    }
  }
  out.metadata = base_metadata(c, c.preset.empty() ? "inline-game" : c.preset);
  out.metadata["alpha1"] = std::string(1, to_char(g.alpha1));
  out.metadata["x1"] = g.x1;
  out.metadata["value_at_start"] = sol.values.at(1, g.x1, g.alpha1);
  const OracleOptions limits;
  if (L <= limits.max_steps && spec.num_states() <= limits.max_states) {
    out.metadata["oracle_value"] = enumerate_oracle(spec, g.alpha1, g.x1);
  }
  out.metadata["warnings"] = json::array();
  out.metadata["rows"] = {{"values", out.values.rows.size()}, {"policy", out.policy.rows.size()}};
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << content;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

bool ResultBundle::divergence_only() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunOutput& r) { return r.n_divergent > 0; });
}

ResultBundle run(const RunConfig& c) {
  ResultBundle bundle;
  switch (c.mode) {
    case Mode::kSolveGeneral:
      bundle.runs.push_back(finite_run(c));
      break;
    case Mode::kSolveLq:
    case Mode::kSolvePotential:
      bundle.runs.push_back(continuous_run(c, build_scenario(c), false));
      break;
    case Mode::kSimulate:
      bundle.runs.push_back(continuous_run(c, build_scenario(c), true));
      break;
    case Mode::kSweep:
      for (double p : c.sweep) {
        RunOutput out = continuous_run(c, build_scenario(c, p), c.n_rollouts > 0);
        out.subdir = "p_" + shortest(p);
        out.metadata["p"] = p;
        bundle.runs.push_back(std::move(out));
      }
      break;
  }
  if (c.mode == Mode::kSweep) {
    bundle.metadata = base_metadata(c, bundle.runs.front().metadata["scenario"]);
    json subdirs = json::array();
    std::vector<std::string> warnings;
    for (const RunOutput& r : bundle.runs) {
      subdirs.push_back(r.subdir);
      for (const auto& w : r.warnings) warnings.push_back(r.subdir + ": " + w);
    }
    bundle.metadata["runs"] = std::move(subdirs);
    bundle.metadata["warnings"] = warnings;
  } else {
    bundle.metadata = bundle.runs.front().metadata;
  }
  return bundle;
}

void write_outputs(const ResultBundle& bundle, const RunConfig& c) {
  namespace fs = std::filesystem;
  const fs::path root(c.output_dir);
  const bool csv = std::find(c.formats.begin(), c.formats.end(), "csv") != c.formats.end();
  const bool as_json = std::find(c.formats.begin(), c.formats.end(), "json") != c.formats.end();
  fs::create_directories(root);
  for (const RunOutput& r : bundle.runs) {
    const fs::path dir = r.subdir.empty() ? root : root / r.subdir;
    fs::create_directories(dir);
    if (csv) {
      write_file(dir / "values.csv", render_csv(r.values));
      write_file(dir / "policy.csv", render_csv(r.policy));
      if (r.stats) write_file(dir / "stats.csv", render_csv(*r.stats));
      if (r.occupancy) write_file(dir / "occupancy.csv", render_csv(*r.occupancy));
    }
    if (as_json) {
      json doc = {{"values", table_json(r.values)}, {"policy", table_json(r.policy)}};
      if (r.stats) doc["stats"] = table_json(*r.stats);
      if (r.occupancy) doc["occupancy"] = table_json(*r.occupancy);
      write_file(dir / "result.json", doc.dump(2) + "\n");
    }
    if (!r.subdir.empty()) write_file(dir / "metadata.json", r.metadata.dump(2) + "\n");
  }
  write_file(root / "metadata.json", bundle.metadata.dump(2) + "\n");
}

int execute(const RunConfig& config, std::string& diagnostics) {
  try {
    const ResultBundle bundle = run(config);
    write_outputs(bundle, config);
    if (bundle.divergence_only()) {
      std::size_t total = 0;
      for (const RunOutput& r : bundle.runs) total += r.n_divergent;
      diagnostics = "sim: " + std::to_string(total) + " divergent rollout(s); results written";
      return kExitDivergence;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    diagnostics = std::string("config: ") + e.what();
    return kExitConfig;
  } catch (const SolverError& e) {
    diagnostics = e.what();
    return kExitSolver;
  } catch (const DomainError& e) {
    diagnostics = e.what();
    return kExitSolver;
  } catch (const std::exception& e) {
    diagnostics = std::string("io: ") + e.what();
    return 1;
  }
}

}  // namespace flipcoop
