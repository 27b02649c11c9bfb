#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "colabel/errors.hpp"
#include "colabel/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, std::optional<double> scale,
            std::optional<std::uint64_t> seed, std::optional<std::string> out_dir) {
  colabel::ExperimentConfig config = colabel::load_experiment_config(config_path);
  if (scale) {
    if (!(*scale > 0.0) || *scale > 1.0) throw colabel::ConfigError("--scale must lie in (0, 1]");
    config.scale = *scale;
  }
  if (seed) config.seed = *seed;
  if (out_dir) config.out_dir = *out_dir;

  const colabel::ExperimentReport report = colabel::run_experiment(config);
  std::printf("experiment %s: %zu snapshots, %s\n", config.id.c_str(), report.snapshots.size(),
              report.verdict.c_str());
  std::printf("artifacts in %s\n", config.out_dir.c_str());
  if (report.diverged) {
    std::fprintf(stderr, "training diverged\n");
    return 3;
  }
  return 0;
}

int cmd_list(const std::string& filter, bool as_json) {
  const auto& table = colabel::shipped_experiments();
  if (as_json) {
    std::printf("[\n");
    bool first = true;
    for (const auto& entry : table) {
      if (entry.id.find(filter) == std::string::npos) continue;
      std::printf("%s  {\"id\": \"%s\", \"config\": \"%s\", \"description\": \"%s\"}",
                  first ? "" : ",\n", entry.id.c_str(), entry.config_path.c_str(),
                  entry.description.c_str());
      first = false;
    }
    std::printf("\n]\n");
    return 0;
  }
  for (const auto& entry : table) {
    if (entry.id.find(filter) == std::string::npos) continue;
    std::printf("%-40s %-46s %s\n", entry.id.c_str(), entry.config_path.c_str(),
                entry.description.c_str());
  }
  return 0;
}

int cmd_check() {
  const char* env = std::getenv("COLABEL_CACHE_DIR");
  const auto results = colabel::run_self_checks(env ? env : "");
  bool all_ok = true;
  for (const auto& result : results) {
    std::printf("check %-42s %s (%s)\n", result.name.c_str(), result.ok ? "ok" : "FAILED",
                result.detail.c_str());
    all_ok = all_ok && result.ok;
  }
  return all_ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised physics-informed PDE solvers"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<double> scale;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  CLI::App* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("config", config_path, "Path to the experiment config")->required();
  run->add_option("--scale", scale, "Shrink point and step counts by this factor in (0, 1]");
  run->add_option("--seed", seed, "Override the sampling seed");
  run->add_option("--out", out_dir, "Override the output directory");

  std::string filter;
  bool as_json = false;
  CLI::App* list = app.add_subcommand("list", "List shipped experiments");
  list->add_option("--filter", filter, "Keep ids containing this substring");
  list->add_flag("--json", as_json, "Emit the table as JSON");

  CLI::App* check = app.add_subcommand("check", "Run derivative and oracle self-checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, scale, seed, out_dir);
    if (list->parsed()) return cmd_list(filter, as_json);
    if (check->parsed()) return cmd_check();
  } catch (const colabel::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const colabel::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const colabel::OracleError& e) {
    std::fprintf(stderr, "oracle failure: %s\n", e.what());
    return 4;
  } catch (const colabel::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  }
  return 0;
}
