#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipcoop/potential_solver.hpp"
#include "flipcoop/sim.hpp"

namespace flipcoop {

/// Schema violation in a run configuration; the message names the key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode : std::uint8_t { kSolveLq, kSolveGeneral, kSolvePotential, kSimulate, kSweep };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Named scenario bundles shipped with the tool.
const std::vector<std::string>& preset_names();

struct RunConfig {
  Mode mode = Mode::kSolveLq;
  /// Preset name, or empty when `scenario` / `game` carries an inline document.
  std::string preset;
  nlohmann::json scenario;
  nlohmann::json game;
  std::optional<double> p;
  std::map<std::string, double> overrides;
  std::vector<double> sweep;
  std::uint64_t seed = 0;
  std::size_t n_rollouts = 1000;
  std::string output_dir = "flipcoop-out";
  std::vector<std::string> formats = {"csv"};
  SelectionRule selection = SelectionRule::kAdmissible;
  ExistenceMode existence = ExistenceMode::kStrict;
  double existence_tolerance = 1e-9;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// `mode_hint` fills in a missing "mode" key; a conflicting one is rejected.
RunConfig parse_config(const std::string& text, std::optional<Mode> mode_hint = {});
std::string render_config(const RunConfig& config);
/// FNV-1a over the rendered configuration.
std::uint64_t config_hash(const RunConfig& config);

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

/// 17 significant digits.
std::string format_double(double x);
std::string render_csv(const Table& table);
nlohmann::json table_json(const Table& table);

struct RunOutput {
  std::string subdir;  // empty for single runs, "p_<value>" inside a sweep
  Table values;
  Table policy;
  std::optional<Table> stats;
  std::optional<Table> occupancy;
  nlohmann::json metadata;
  std::vector<std::string> warnings;
  std::size_t n_divergent = 0;
};

struct ResultBundle {
  std::vector<RunOutput> runs;
  nlohmann::json metadata;

  bool divergence_only() const;
};

Scenario build_scenario(const RunConfig& config, std::optional<double> p_override = {});
ResultBundle run(const RunConfig& config);
/// Files under config.output_dir: values.csv, policy.csv, stats.csv,
/// occupancy.csv, result.json (json format) and metadata.json.
void write_outputs(const ResultBundle& bundle, const RunConfig& config);

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitDivergence = 4;

/// run + write_outputs with errors mapped to exit codes; diagnostics go to
/// `diagnostics`.
int execute(const RunConfig& config, std::string& diagnostics);

std::string_view tool_version();

}  // namespace flipcoop
