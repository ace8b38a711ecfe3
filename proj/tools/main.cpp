#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flipcoop/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Takeover games between a human and an autonomous agent"};
  std::string mode;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> formats;
  app.add_option("mode", mode, "solve-lq | solve-general | solve-potential | simulate | sweep")
      ->required();
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--seed", seed, "root seed, overrides the config");
  app.add_option("--out", out_dir, "output directory, overrides the config");
  app.add_option("--format", formats, "comma-separated subset of csv,json");
  app.set_version_flag("--version", std::string(flipcoop::tool_version()));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : flipcoop::kExitConfig;
  }

  flipcoop::RunConfig config;
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw flipcoop::ConfigError("cannot read config file " + config_path);
    std::ostringstream text;
    text << in.rdbuf();
    config = flipcoop::parse_config(text.str(), flipcoop::parse_mode(mode));
    if (seed) config.seed = *seed;
    if (out_dir) {
      if (out_dir->empty()) throw flipcoop::ConfigError("--out must not be empty");
      config.output_dir = *out_dir;
    }
    if (formats) {
      std::string list = "[";
      std::stringstream ss(*formats);
      std::string item;
      bool first = true;
      while (std::getline(ss, item, ',')) {
        list += (first ? "\"" : ",\"") + item + "\"";
        first = false;
      }
      list += "]";
      // Reuse the schema check on the format list.
      nlohmann::json doc = nlohmann::json::parse(flipcoop::render_config(config));
      doc["formats"] = nlohmann::json::parse(list);
      config = flipcoop::parse_config(doc.dump());
    }
  } catch (const flipcoop::ConfigError& e) {
    std::cerr << "flipcoop: config: " << e.what() << "\n";
    return flipcoop::kExitConfig;
  }

  std::string diagnostics;
  const int code = flipcoop::execute(config, diagnostics);
  if (!diagnostics.empty()) std::cerr << "flipcoop: " << diagnostics << "\n";
  return code;
}
