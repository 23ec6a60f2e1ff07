#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgvamp/core/config.hpp"
#include "cgvamp/core/trace.hpp"

namespace cgvamp {

// One grid cell of a parameter sweep. The base config is patched with the
// cell's delta/kappa/variant/inner policy; each seed then overrides the
// operator, signal, noise and probe seeds with one master value (the derived
// streams keep them decorrelated).
struct SweepCell {
  std::string id;
  double delta = 0.0;
  double kappa = 0.0;
  std::string variant;
  InnerPolicy inner;
  RunConfig config; // fully resolved, minus the seed overrides
};

struct SweepSpec {
  RunConfig base;
  std::vector<double> deltas;
  std::vector<double> kappas;
  std::vector<std::string> variants;
  std::vector<InnerPolicy> inners;
  std::vector<std::uint64_t> seeds;

  static SweepSpec from_json(const std::string& text);
  std::vector<SweepCell> cells() const;
  std::string hash() const;
};

// Per-cell aggregate across seeds, one entry per outer iteration t.
struct SummaryRow {
  std::string cell;
  int t = 0;
  int n_seeds = 0;
  double mean_nmse = 0.0;
  double std_nmse = 0.0;
  double mean_nmse_db = 0.0; // 10*log10(mean_nmse)
  double mean_inner_iterations = 0.0;
  double mean_cum_ms = 0.0;
};

struct SweepOutcome {
  std::vector<SummaryRow> summary;
  std::string manifest_json; // ordered, no timestamps
};

// Runs every cell x seed, writing per-run outer/inner traces plus summary.csv
// and manifest.json into out_dir. Cells run concurrently; output is merged in
// grid order so reruns are byte-identical.
SweepOutcome run_sweep(const SweepSpec& spec, const std::string& out_dir);

// Minimal CSV reader for the files this toolkit writes: '#' lines skipped,
// first remaining row is the header.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const; // -1 when absent
  double number(size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);

// Renders one of the built-in chart kinds from a summary.csv, one series per
// cell. Kinds: nmse_vs_t, inner_iters_vs_t, time_vs_t.
void plot_summary(const std::string& summary_csv, const std::string& kind,
                  const std::string& out_svg);

struct AuditCheck {
  std::string name;
  bool passed = false;
  double worst = 0.0;     // worst observed discrepancy
  double threshold = 0.0; // limit it was held to
  int samples = 0;
  std::string detail;
};

struct AuditReport {
  bool passed = false;
  std::vector<AuditCheck> checks;
  std::string to_json() const;
};

// Runs the config with oracle tracing forced on and compares every in-loop
// estimate against its ground-truth counterpart.
AuditReport audit_run(const RunConfig& config);

} // namespace cgvamp
