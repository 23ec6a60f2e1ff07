// Command-line front end for the cgvamp shared library. Everything numeric
// happens behind cgvamp.h; this file only shuffles JSON text and files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cgvamp/cgvamp.h"

namespace {

using json = nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw CLI::ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  cgvamp_string_free(s);
  return out;
}

int report_failure(const char* what, cgvamp_status s) {
  std::fprintf(stderr, "%s: %s: %s\n", what, cgvamp_status_string(s), cgvamp_last_error());
  return 1;
}

// Seed override: one master value fans out to the operator, signal, noise and
// probe streams (they stay decorrelated through per-stream derivation).
void patch_seed(json& cfg, std::uint64_t seed) {
  cfg["operator"]["seed"] = seed;
  cfg["signal"]["seed"] = seed;
  cfg["noise"]["seed"] = seed;
  if (cfg.contains("denoiser")) cfg["denoiser"]["probe_seed"] = seed;
  else cfg["denoiser"] = json{{"probe_seed", seed}};
}

struct RunArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::uint64_t> seeds;
  std::string oracle;  // "", "on", "off"
};

int do_run(const RunArgs& args) {
  json cfg;
  try {
    cfg = json::parse(read_file(args.config_path));
  } catch (const json::exception& e) {
    std::fprintf(stderr, "run: %s is not valid JSON: %s\n", args.config_path.c_str(), e.what());
    return 1;
  }
  if (!args.oracle.empty()) cfg["trace"]["oracle"] = (args.oracle == "on");

  std::filesystem::create_directories(args.out_dir);
  std::vector<std::uint64_t> seeds = args.seeds;
  const bool multi = !seeds.empty();
  if (!multi) seeds.push_back(0);  // single run, config's own seeds

  int rc = 0;
  for (const auto seed : seeds) {
    json one = cfg;
    if (multi) patch_seed(one, seed);
    cgvamp_config* handle = nullptr;
    if (auto s = cgvamp_config_create(one.dump().c_str(), &handle))
      return report_failure("run: config", s);

    char* hash = nullptr;
    cgvamp_config_hash(handle, &hash);
    cgvamp_result* result = nullptr;
    const cgvamp_status rs = cgvamp_run(handle, nullptr, &result);
    if (rs != CGVAMP_OK && result == nullptr) {
      cgvamp_config_destroy(handle);
      return report_failure("run", rs);
    }

    const std::string stem = multi ? "run_seed" + std::to_string(seed) : "run";
    const auto outer = (std::filesystem::path(args.out_dir) / (stem + ".csv")).string();
    const auto inner = (std::filesystem::path(args.out_dir) / (stem + "_inner.csv")).string();
    if (auto s = cgvamp_result_write_csv(result, outer.c_str(), inner.c_str()))
      rc = report_failure("run: write", s);

    int64_t rows = 0;
    cgvamp_result_outer_rows(result, &rows);
    double nmse_db = 0.0;
    if (rows > 0) cgvamp_result_outer_value(result, rows - 1, "nmse_db", &nmse_db);
    const cgvamp_status final_status = cgvamp_result_status(result);
    if (final_status == CGVAMP_OK) {
      std::printf("%s: config %s, %lld outer iterations, final NMSE %.2f dB -> %s\n",
                  stem.c_str(), take_string(hash).c_str(), static_cast<long long>(rows),
                  nmse_db, outer.c_str());
    } else {
      std::printf("%s: stopped early after %lld iterations (%s: %s) -> %s\n", stem.c_str(),
                  static_cast<long long>(rows), cgvamp_status_string(final_status),
                  cgvamp_result_error_message(result), outer.c_str());
      take_string(hash);
      rc = 1;
    }
    cgvamp_result_destroy(result);
    cgvamp_config_destroy(handle);
  }
  return rc;
}

int do_sweep(const std::string& config_path, const std::string& out_dir,
             const std::vector<std::uint64_t>& seeds) {
  json spec;
  try {
    spec = json::parse(read_file(config_path));
  } catch (const json::exception& e) {
    std::fprintf(stderr, "sweep: %s is not valid JSON: %s\n", config_path.c_str(), e.what());
    return 1;
  }
  if (!seeds.empty()) spec["seeds"] = seeds;

  char* manifest = nullptr;
  if (auto s = cgvamp_sweep_run(spec.dump().c_str(), out_dir.c_str(), &manifest))
    return report_failure("sweep", s);
  const std::string text = take_string(manifest);
  const auto parsed = json::parse(text);
  size_t errors = 0;
  for (const auto& cell : parsed.at("cells"))
    if (cell.at("status").get<std::string>() != "ok") ++errors;
  std::printf("sweep: %zu cells -> %s (manifest.json, summary.csv)\n",
              parsed.at("cells").size(), out_dir.c_str());
  if (errors > 0) {
    std::fprintf(stderr, "sweep: %zu cells reported errors, see manifest.json\n", errors);
    return 1;
  }
  return 0;
}

int do_plot(const std::string& in_csv, const std::string& kind, const std::string& out) {
  std::string target = out;
  if (std::filesystem::is_directory(out))
    target = (std::filesystem::path(out) / (kind + ".svg")).string();
  if (auto s = cgvamp_plot_csv(in_csv.c_str(), kind.c_str(), target.c_str()))
    return report_failure("plot", s);
  std::printf("plot: %s -> %s\n", kind.c_str(), target.c_str());
  return 0;
}

int do_audit(const std::string& config_path, const std::string& out_path) {
  const std::string text = read_file(config_path);
  char* report = nullptr;
  int passed = 0;
  if (auto s = cgvamp_audit(text.c_str(), &report, &passed))
    return report_failure("audit", s);
  const std::string body = take_string(report);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << body;
    if (!out.good()) {
      std::fprintf(stderr, "audit: cannot write %s\n", out_path.c_str());
      return 1;
    }
  }
  std::fputs(body.c_str(), stdout);
  std::printf("audit: %s\n", passed ? "PASS" : "FAIL");
  return passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"cgvamp: conjugate-gradient VAMP solver toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", []() { return std::string(cgvamp_version()); });

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "solve one instance and write trace CSVs");
  run->add_option("--config", run_args.config_path, "run config JSON")->required();
  run->add_option("--out", run_args.out_dir, "output directory (default .)");
  run->add_option("--seeds", run_args.seeds,
                  "comma-separated master seeds; one run per seed")
      ->delimiter(',');
  run->add_option("--oracle", run_args.oracle, "force oracle diagnostics on or off")
      ->check(CLI::IsMember({"on", "off"}));

  std::string sweep_config, sweep_out = "sweep_out";
  std::vector<std::uint64_t> sweep_seeds;
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid and aggregate");
  sweep->add_option("--config", sweep_config, "sweep spec JSON (base + grid + seeds)")
      ->required();
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--seeds", sweep_seeds, "override the spec's seed list")->delimiter(',');

  std::string plot_in, plot_kind = "nmse_vs_t", plot_out = ".";
  auto* plot = app.add_subcommand("plot", "render an SVG chart from a sweep summary");
  plot->add_option("--in", plot_in, "summary.csv from a sweep")->required();
  plot->add_option("--kind", plot_kind, "nmse_vs_t | inner_iters_vs_t | time_vs_t");
  plot->add_option("--out", plot_out, "output .svg path or directory");

  std::string audit_config, audit_out;
  auto* audit = app.add_subcommand(
      "audit", "run with oracle diagnostics and check every in-loop estimator");
  audit->add_option("--config", audit_config, "run config JSON")->required();
  audit->add_option("--out", audit_out, "also write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(run_args);
    if (sweep->parsed()) return do_sweep(sweep_config, sweep_out, sweep_seeds);
    if (plot->parsed()) return do_plot(plot_in, plot_kind, plot_out);
    if (audit->parsed()) return do_audit(audit_config, audit_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
