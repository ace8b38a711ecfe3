#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "flipcoop/cli.hpp"

using namespace flipcoop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flipcoop-unit-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::size_t lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

RunConfig config_at(const std::string& text, const fs::path& out) {
  RunConfig c = parse_config(text);
  c.output_dir = out.string();
  return c;
}

const char* kUnstable = R"({
  "mode": "simulate",
  "n_rollouts": 8,
  "scenario": {
    "horizon": 30, "E": 10, "B": 0, "C": 0,
    "gains": {"K": 0, "W": 0},
    "costs": {"G_H": 1, "G_A": 1, "H": 1, "A": 1},
    "intent": 0.5, "x1": [1], "alpha1": "A"
  }
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("minimal preset document") {
  const RunConfig c = parse_config(R"({"mode": "solve-lq", "scenario": "scalar-lti", "p": 0.4})");
  CHECK(c.mode == Mode::kSolveLq);
  CHECK(c.preset == "scalar-lti");
  CHECK(c.p == 0.4);
  const Scenario s = build_scenario(c);
  CHECK(s.horizon.steps() == 30);
  CHECK(s.intent.at(1) == 0.4);
}

TEST_CASE("schema violations name the key") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"mode": "solve-lq", "scenario": "scalar-lti", "p": 1.3})"),
                       doctest::Contains("\"p\""), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"mode": "solve-lq", "scenario": "scalar-lti", "p": 0.4, "foo": 1})"),
                       doctest::Contains("foo"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"mode": "solve-lq", "scenario": "scalar-lti", "seed": "x"})"),
                       doctest::Contains("seed"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"mode": "simulate", "scenario": "scalar-lti", "p": 0.4, "n_rollouts": 0})"),
                       doctest::Contains("n_rollouts"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"mode": "warp", "scenario": "scalar-lti"})"),
                       doctest::Contains("warp"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mode": "solve-lq", "scenario": "vehicle-a", "overrides": {"bogus": 1}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mode": "solve-lq", "scenario": "potential-aligned"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mode": "solve-potential", "scenario": "scalar-lti", "p": 0.5})"),
                  ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"mode": "solve-lq", "scenario": {"horizon": 2, "E": 1, "B": 1,
      "C": 1, "gains": {"K": 0, "W": 0}, "costs": {"G_H": 1, "G_A": 1, "H": 1, "A": 1},
      "intent": [0.5], "x1": 1}})"),
                       doctest::Contains("scenario.intent"), ConfigError);
}

TEST_CASE("mode hint") {
  const RunConfig c = parse_config(R"({"scenario": "scalar-lti", "p": 0.5})", Mode::kSimulate);
  CHECK(c.mode == Mode::kSimulate);
  CHECK_THROWS_AS(parse_config(R"({"mode": "solve-lq", "scenario": "scalar-lti", "p": 0.5})", Mode::kSimulate),
                  ConfigError);
}

TEST_CASE("render and parse round-trip") {
  const std::vector<std::string> docs = {
      R"({"mode": "solve-lq", "scenario": "scalar-lti", "p": 0.4})",
      R"({"mode": "simulate", "scenario": "vehicle-b", "overrides": {"speed": 4.5}, "seed": 12, "n_rollouts": 7, "formats": ["csv", "json"]})",
      R"({"mode": "sweep", "scenario": "scalar-lti", "sweep": [0.4, 0.55, 0.7], "selection": "threshold"})",
      R"({"mode": "solve-potential", "scenario": "potential-misaligned", "existence": "record", "existence_tolerance": 1e-6})",
      R"({"mode": "solve-general", "scenario": "finite-demo"})",
      kUnstable,
  };
  for (const std::string& d : docs) {
    const RunConfig c = parse_config(d);
    const std::string text = render_config(c);
    CHECK(parse_config(text) == c);
    CHECK(render_config(parse_config(text)) == text);
    CHECK(config_hash(parse_config(text)) == config_hash(c));
  }
}

TEST_CASE("format_double") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  const Table t{{"a", "b", "c"}, {{1.5, 2LL, std::string("x")}}};
  CHECK(render_csv(t) == "a,b,c\n1.5,2,x\n");
}

TEST_CASE("solve-lq row counts and byte stability") {
  const fs::path a = scratch("lq-a"), b = scratch("lq-b");
  const std::string doc = R"({"mode": "solve-lq", "scenario": "scalar-lti", "p": 0.4, "formats": ["csv", "json"]})";
  std::string diag;
  REQUIRE(execute(config_at(doc, a), diag) == kExitOk);
  REQUIRE(execute(config_at(doc, b), diag) == kExitOk);
  const std::string values = slurp(a / "values.csv");
  CHECK(lines(values) == 32);
  CHECK(values.rfind("k,P_H_00,P_A_00\n", 0) == 0);
  CHECK(lines(slurp(a / "policy.csv")) == 61);
  for (const char* f : {"values.csv", "policy.csv", "result.json"}) CHECK(slurp(a / f) == slurp(b / f));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("sweep writes one subdirectory per p") {
  const fs::path out = scratch("sweep");
  std::string diag;
  REQUIRE(execute(config_at(R"({"mode": "sweep", "scenario": "scalar-lti", "sweep": [0.4, 0.55, 0.7], "n_rollouts": 0})", out),
                  diag) == kExitOk);
  for (const char* d : {"p_0.4", "p_0.55", "p_0.7"}) {
    CHECK(fs::exists(out / d / "values.csv"));
    CHECK(fs::exists(out / d / "policy.csv"));
  }
  CHECK(fs::exists(out / "metadata.json"));
  fs::remove_all(out);
}

TEST_CASE("existence failure names the step") {
  const fs::path out = scratch("misaligned");
  std::string diag;
  CHECK(execute(config_at(R"({"mode": "solve-potential", "scenario": "potential-misaligned"})", out), diag) ==
        kExitSolver);
  CHECK(diag.find("k=") != std::string::npos);
  const fs::path rec = scratch("misaligned-record");
  CHECK(execute(config_at(R"({"mode": "solve-potential", "scenario": "potential-misaligned", "existence": "record"})", rec),
                diag) == kExitOk);
  CHECK(slurp(rec / "policy.csv").find("existence") != std::string::npos);
  fs::remove_all(out);
  fs::remove_all(rec);
}

TEST_CASE("divergence-only runs exit with 4 and still write results") {
  const fs::path out = scratch("diverge");
  std::string diag;
  CHECK(execute(config_at(kUnstable, out), diag) == kExitDivergence);
  CHECK(fs::exists(out / "stats.csv"));
  const std::string policy = slurp(out / "policy.csv");
  const std::string meta = slurp(out / "metadata.json");
  CHECK(policy.find("divergent:8") != std::string::npos);
  CHECK(meta.find("divergent:8") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("warnings land in the policy table and the metadata") {
  const ResultBundle r = run(parse_config(R"({"mode": "solve-lq", "scenario": "vehicle-a"})"));
  const RunOutput& o = r.runs.front();
  REQUIRE_FALSE(o.warnings.empty());
  std::size_t tagged = 0;
  for (const auto& row : o.policy.rows) tagged += !std::get<std::string>(row.back()).empty();
  CHECK(tagged > 0);
  CHECK(o.metadata["warnings"].size() == o.warnings.size());
}

TEST_CASE("finite game mode matches the oracle") {
  const ResultBundle r = run(parse_config(R"({"mode": "solve-general", "scenario": "finite-demo"})"));
  const auto& meta = r.runs.front().metadata;
  CHECK(meta["value_at_start"].get<double>() == meta["oracle_value"].get<double>());
}

TEST_CASE("every preset is byte-stable") {
  for (const std::string& preset : preset_names()) {
    CAPTURE(preset);
    std::string mode = "simulate";
    if (preset == "finite-demo") mode = "solve-general";
    if (preset == "potential-misaligned") mode = "solve-potential\", \"existence\": \"record";
    const std::string doc = "{\"mode\": \"" + mode + "\", \"scenario\": \"" + preset + "\", \"n_rollouts\": 50, \"seed\": 9" +
                            (preset == "scalar-lti" ? ", \"p\": 0.55}" : "}");
    const fs::path a = scratch(preset + "-a"), b = scratch(preset + "-b");
    std::string diag;
    REQUIRE(execute(config_at(doc, a), diag) == kExitOk);
    REQUIRE(execute(config_at(doc, b), diag) == kExitOk);
    for (const auto& e : fs::directory_iterator(a)) {
      if (e.path().extension() == ".csv") CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

}
