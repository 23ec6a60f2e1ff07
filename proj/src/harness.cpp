#include "cgvamp/core/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cgvamp/core/errors.hpp"
#include "cgvamp/core/outer_loop.hpp"
#include "cgvamp/core/svg_plot.hpp"

namespace cgvamp {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

double json_number_or_inf(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity")
      return std::numeric_limits<double>::infinity();
  }
  fail(ErrorCode::parse, std::string("sweep: ") + what + " must be a number or \"inf\"");
}

InnerPolicy parse_inner(const json& ji) {
  InnerPolicy p;
  require(ji.is_object() && ji.contains("policy"), ErrorCode::parse,
          "sweep: inner entries need a 'policy' field");
  const std::string policy = ji.at("policy").get<std::string>();
  if (policy == "acg") {
    p.mode = InnerPolicy::Mode::adaptive;
    p.acg.c = ji.value("c", 0.9);
    if (ji.contains("delta_threshold"))
      p.acg.delta_threshold = json_number_or_inf(ji.at("delta_threshold"), "delta_threshold");
    p.acg.i_max = ji.value("i_max", 100);
  } else if (policy == "fixed") {
    p.mode = InnerPolicy::Mode::fixed;
    p.fixed_iterations = ji.value("iterations", 1);
  } else {
    fail(ErrorCode::parse, "sweep: inner policy must be 'acg' or 'fixed', got '" + policy + "'");
  }
  return p;
}

std::string slug_number(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  std::erase(s, '+');
  return s;
}

std::string policy_tag(const InnerPolicy& p) {
  if (p.mode == InnerPolicy::Mode::fixed)
    return "fixed" + std::to_string(p.fixed_iterations);
  return "acg";
}

std::string inner_key(const InnerPolicy& p) {
  if (p.mode == InnerPolicy::Mode::fixed)
    return "fixed:" + std::to_string(p.fixed_iterations);
  return "acg:" + format_double(p.acg.c) + ":" + format_double(p.acg.delta_threshold) + ":" +
         std::to_string(p.acg.i_max);
}

// Grid entries can repeat a tag (two acg policies differing only in their
// thresholds); those get a positional suffix so cell ids stay unique.
std::vector<std::string> inner_tags(const std::vector<InnerPolicy>& inners) {
  std::vector<std::string> tags(inners.size());
  std::map<std::string, int> uses;
  for (const auto& p : inners) uses[policy_tag(p)]++;
  for (size_t k = 0; k < inners.size(); ++k) {
    tags[k] = policy_tag(inners[k]);
    if (uses[tags[k]] > 1) tags[k] += "_v" + std::to_string(k);
  }
  return tags;
}

struct CellWork {
  std::vector<std::string> files;
  std::string status = "ok";
  std::vector<std::vector<OuterRecord>> outers;  // one per seed
};

void run_cell(const SweepCell& cell, const std::vector<std::uint64_t>& seeds,
              const std::filesystem::path& dir, CellWork& out) {
  for (const auto seed : seeds) {
    RunConfig cfg = cell.config;
    cfg.op.seed = seed;
    cfg.signal.seed = seed;
    cfg.noise.seed = seed;
    cfg.denoiser.probe_seed = seed;
    const std::string stem = cell.id + "__seed" + std::to_string(seed);
    try {
      auto op = build_operator(cfg.op);
      auto inst = SystemInstance::make(op, cfg.signal, cfg.noise);
      RunResult res = run(cfg, inst);
      write_outer_csv(res, (dir / (stem + ".csv")).string());
      write_inner_csv(res, (dir / (stem + "_inner.csv")).string());
      out.files.push_back(stem + ".csv");
      out.files.push_back(stem + "_inner.csv");
      if (!res.ok && out.status == "ok")
        out.status = "error: seed " + std::to_string(seed) + ": " + res.error;
      out.outers.push_back(std::move(res.outer));
    } catch (const std::exception& e) {
      if (out.status == "ok")
        out.status = "error: seed " + std::to_string(seed) + ": " + e.what();
      out.outers.emplace_back();
    }
  }
}

} // namespace

SweepSpec SweepSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("sweep: invalid JSON: ") + e.what());
  }
  require(j.is_object() && j.contains("base"), ErrorCode::parse,
          "sweep: top level needs a 'base' config");
  SweepSpec spec;
  spec.base = RunConfig::from_json(j.at("base").dump());
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    require(g.is_object(), ErrorCode::parse, "sweep: 'grid' must be an object");
    for (const auto& [key, val] : g.items()) {
      if (key == "delta") {
        for (const auto& d : val) spec.deltas.push_back(d.get<double>());
      } else if (key == "kappa") {
        for (const auto& kp : val) spec.kappas.push_back(kp.get<double>());
      } else if (key == "variant") {
        for (const auto& v : val) spec.variants.push_back(v.get<std::string>());
      } else if (key == "inner") {
        for (const auto& ip : val) spec.inners.push_back(parse_inner(ip));
      } else {
        fail(ErrorCode::parse, "sweep: unknown grid axis '" + key + "'");
      }
    }
  }
  require(j.contains("seeds") && j.at("seeds").is_array(), ErrorCode::parse,
          "sweep: needs a 'seeds' array");
  for (const auto& s : j.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
  require(!spec.seeds.empty(), ErrorCode::invalid_arg, "sweep: 'seeds' must be non-empty");
  return spec;
}

std::vector<SweepCell> SweepSpec::cells() const {
  const double base_delta =
      static_cast<double>(base.op.m) / static_cast<double>(base.op.n);
  std::vector<double> ds = deltas.empty() ? std::vector<double>{base_delta} : deltas;
  std::vector<double> ks = kappas.empty() ? std::vector<double>{base.op.kappa} : kappas;
  std::vector<std::string> vs =
      variants.empty() ? std::vector<std::string>{base.algorithm.variant} : variants;
  std::vector<InnerPolicy> is =
      inners.empty() ? std::vector<InnerPolicy>{base.algorithm.inner} : inners;
  const auto tags = inner_tags(is);

  std::vector<SweepCell> out;
  for (const double d : ds)
    for (const double kp : ks)
      for (const auto& v : vs)
        for (size_t pi = 0; pi < is.size(); ++pi) {
          SweepCell cell;
          cell.delta = d;
          cell.kappa = kp;
          cell.variant = v;
          cell.inner = is[pi];
          cell.id = "delta" + slug_number(d) + "_kappa" + slug_number(kp) + "_" + v + "_" +
                    tags[pi];
          cell.config = base;
          cell.config.op.kappa = kp;
          cell.config.op.m = std::llround(d * static_cast<double>(base.op.n));
          cell.config.algorithm.variant = v;
          cell.config.algorithm.inner = is[pi];
          cell.config.validate();
          out.push_back(std::move(cell));
        }
  return out;
}

std::string SweepSpec::hash() const {
  std::string acc = base.hash();
  for (const double d : deltas) acc += "|d" + format_double(d);
  for (const double k : kappas) acc += "|k" + format_double(k);
  for (const auto& v : variants) acc += "|v" + v;
  for (const auto& p : inners) acc += "|i" + inner_key(p);
  for (const auto s : seeds) acc += "|s" + std::to_string(s);
  return fnv1a_hex(acc);
}

SweepOutcome run_sweep(const SweepSpec& spec, const std::string& out_dir) {
  const auto cells = spec.cells();
  require(!cells.empty(), ErrorCode::invalid_arg, "sweep: empty grid");
  require(!spec.seeds.empty(), ErrorCode::invalid_arg, "sweep: no seeds");
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "sweep: cannot create '" + out_dir + "': " + ec.message());

  std::vector<CellWork> work(cells.size());
  std::atomic<size_t> next{0};
  const size_t workers =
      std::min(cells.size(), static_cast<size_t>(std::max(1u, std::thread::hardware_concurrency())));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (;;) {
        const size_t ci = next.fetch_add(1);
        if (ci >= cells.size()) return;
        run_cell(cells[ci], spec.seeds, dir, work[ci]);
      }
    });
  for (auto& th : pool) th.join();

  SweepOutcome outcome;
  const bool timed = spec.base.trace.include_timings;
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    size_t t_count = 0;
    for (const auto& rows : work[ci].outers) t_count = std::max(t_count, rows.size());
    for (size_t t = 0; t < t_count; ++t) {
      SummaryRow row;
      row.cell = cells[ci].id;
      row.t = static_cast<int>(t);
      std::vector<double> nmse;
      double iter_sum = 0.0, ms_sum = 0.0;
      for (const auto& rows : work[ci].outers) {
        if (rows.size() <= t) continue;
        nmse.push_back(rows[t].nmse);
        iter_sum += rows[t].inner_iterations;
        ms_sum += rows[t].cum_ms;
      }
      if (nmse.empty()) continue;
      row.n_seeds = static_cast<int>(nmse.size());
      double mean = 0.0;
      for (const double v : nmse) mean += v;
      mean /= row.n_seeds;
      double var = 0.0;
      for (const double v : nmse) var += (v - mean) * (v - mean);
      row.mean_nmse = mean;
      row.std_nmse = row.n_seeds > 1 ? std::sqrt(var / (row.n_seeds - 1)) : 0.0;
      row.mean_nmse_db = 10.0 * std::log10(mean);
      row.mean_inner_iterations = iter_sum / row.n_seeds;
      row.mean_cum_ms = timed ? ms_sum / row.n_seeds : std::numeric_limits<double>::quiet_NaN();
      outcome.summary.push_back(std::move(row));
    }
  }

  {
    std::ofstream out(dir / "summary.csv");
    require(out.good(), ErrorCode::io, "sweep: cannot write summary.csv");
    out << "# cgvamp-summary v1\n";
    out << "cell,t,n_seeds,mean_nmse,std_nmse,mean_nmse_db,mean_inner_iterations,mean_cum_ms\n";
    for (const auto& r : outcome.summary) {
      out << r.cell << ',' << r.t << ',' << r.n_seeds << ',' << format_double(r.mean_nmse)
          << ',' << format_double(r.std_nmse) << ',' << format_double(r.mean_nmse_db) << ','
          << format_double(r.mean_inner_iterations) << ',' << format_double(r.mean_cum_ms)
          << '\n';
    }
    require(out.good(), ErrorCode::io, "sweep: summary.csv write failed");
  }

  ojson manifest;
  manifest["schema"] = "cgvamp-manifest v1";
  manifest["sweep_hash"] = spec.hash();
  manifest["cells"] = ojson::array();
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    ojson c;
    c["id"] = cells[ci].id;
    c["delta"] = cells[ci].delta;
    c["kappa"] = cells[ci].kappa;
    c["variant"] = cells[ci].variant;
    c["policy"] = policy_tag(cells[ci].inner);
    c["config_hash"] = cells[ci].config.hash();
    c["seeds"] = spec.seeds;
    c["files"] = work[ci].files;
    c["status"] = work[ci].status;
    manifest["cells"].push_back(std::move(c));
  }
  manifest["summary"] = "summary.csv";
  outcome.manifest_json = manifest.dump(2) + "\n";
  {
    std::ofstream out(dir / "manifest.json");
    require(out.good(), ErrorCode::io, "sweep: cannot write manifest.json");
    out << outcome.manifest_json;
    require(out.good(), ErrorCode::io, "sweep: manifest.json write failed");
  }
  return outcome;
}

int CsvTable::column(const std::string& name) const {
  for (size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return static_cast<int>(k);
  return -1;
}

double CsvTable::number(size_t row, int col) const {
  require(row < rows.size() && col >= 0 && static_cast<size_t>(col) < rows[row].size(),
          ErrorCode::invalid_arg, "csv: cell out of range");
  const std::string& s = rows[row][static_cast<size_t>(col)];
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorCode::parse,
          "csv: '" + s + "' is not a number");
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (!have_header) {
      table.columns = std::move(fields);
      have_header = true;
    } else {
      require(fields.size() == table.columns.size(), ErrorCode::parse,
              "csv: ragged row in '" + path + "'");
      table.rows.push_back(std::move(fields));
    }
  }
  require(have_header, ErrorCode::parse, "csv: '" + path + "' has no header");
  return table;
}

void plot_summary(const std::string& summary_csv, const std::string& kind,
                  const std::string& out_svg) {
  std::string y_col, y_label, title;
  if (kind == "nmse_vs_t") {
    y_col = "mean_nmse_db";
    y_label = "NMSE (dB)";
    title = "NMSE vs outer iteration";
  } else if (kind == "inner_iters_vs_t") {
    y_col = "mean_inner_iterations";
    y_label = "inner iterations";
    title = "Inner iteration count vs outer iteration";
  } else if (kind == "time_vs_t") {
    y_col = "mean_cum_ms";
    y_label = "cumulative time (ms)";
    title = "Cumulative wall time vs outer iteration";
  } else {
    fail(ErrorCode::invalid_arg,
         "plot: unknown kind '" + kind + "' (nmse_vs_t, inner_iters_vs_t, time_vs_t)");
  }
  const CsvTable table = read_csv(summary_csv);
  const int c_cell = table.column("cell"), c_t = table.column("t"), c_y = table.column(y_col);
  require(c_cell >= 0 && c_t >= 0 && c_y >= 0, ErrorCode::parse,
          "plot: '" + summary_csv + "' is not a sweep summary");
  std::vector<PlotSeries> series;
  std::map<std::string, size_t> index;
  for (size_t r = 0; r < table.rows.size(); ++r) {
    const std::string& cell = table.rows[r][static_cast<size_t>(c_cell)];
    auto it = index.find(cell);
    if (it == index.end()) {
      it = index.emplace(cell, series.size()).first;
      series.push_back(PlotSeries{cell, {}, {}});
    }
    series[it->second].x.push_back(table.number(r, c_t));
    series[it->second].y.push_back(table.number(r, c_y));
  }
  require(!series.empty(), ErrorCode::invalid_arg, "plot: summary has no rows");
  render_line_chart(title, "outer iteration t", y_label, series, out_svg);
}

namespace {

struct CheckBuilder {
  AuditCheck check;
  explicit CheckBuilder(std::string name, double threshold) {
    check.name = std::move(name);
    check.threshold = threshold;
    check.passed = true;
  }
  void sample(double score) {
    check.samples++;
    check.worst = std::max(check.worst, score);
    if (score > check.threshold) check.passed = false;
  }
  AuditCheck finish(std::string detail) {
    if (check.detail.empty())
      check.detail = detail.empty() ? "no eligible samples" : std::move(detail);
    return check;
  }
};

} // namespace

std::string AuditReport::to_json() const {
  ojson j;
  j["passed"] = passed;
  j["checks"] = ojson::array();
  for (const auto& c : checks) {
    ojson jc;
    jc["name"] = c.name;
    jc["passed"] = c.passed;
    jc["worst"] = c.worst;
    jc["threshold"] = c.threshold;
    jc["samples"] = c.samples;
    jc["detail"] = c.detail;
    j["checks"].push_back(std::move(jc));
  }
  return j.dump(2) + "\n";
}

AuditReport audit_run(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.trace.oracle = true;
  cfg.validate();
  auto op = build_operator(cfg.op);
  auto inst = SystemInstance::make(op, cfg.signal, cfg.noise);
  const RunResult res = run(cfg, inst);

  AuditReport report;
  if (!res.ok) {
    AuditCheck c;
    c.name = "run_completed";
    c.passed = false;
    c.detail = res.error;
    report.checks.push_back(std::move(c));
    report.passed = false;
    return report;
  }

  const double stat = 3.0 / std::sqrt(static_cast<double>(cfg.op.n));
  const bool cold = cfg.algorithm.variant == "cgvamp";

  // The v_ba estimate is a quadratic form in A; against the ground truth it
  // fluctuates at sd sqrt(2 sum_k s_k^4)/n, which badly conditioned spectra
  // push well past the generic 3/sqrt(n) scale. Five sds keeps the false-alarm
  // rate negligible over a handful of outer draws while still catching
  // normalization or bookkeeping errors, which sit at tens of percent.
  const double sum_s4 = op->spectrum().array().square().square().sum();
  const double v_ba_scale =
      std::sqrt(2.0 * sum_s4) / static_cast<double>(cfg.op.n);

  // The recursion-based correction scalar against its ground-truth projection,
  // compared in one shared sign convention.
  {
    CheckBuilder b("correction_scalar_recursion", std::max(0.05, stat));
    for (const auto& rec : res.inner) {
      if (rec.t > 5 || rec.row.i < 1) continue;
      if (rec.row.flags & kFlagGammaZero) continue;
      const double denom = std::max(std::abs(rec.oracle_nu_bar), 1e-12);
      b.sample(std::abs(rec.row.nu_bar - rec.oracle_nu_bar) / denom);
    }
    report.checks.push_back(b.finish("relative error, outer t <= 5, every inner step"));
  }
  {
    // Absolute cushion anchored at n = 16384 (where it holds with ~0.7
    // margin) and CLT-scaled, since the recursion's finite-n error grows as
    // 1/sqrt(n) with a spectrum-dependent constant.
    const double cushion = 2e-4 * std::sqrt(16384.0 / static_cast<double>(cfg.op.n));
    CheckBuilder b("noise_projection_recursion", 1.0);
    for (const auto& rec : res.inner) {
      if (rec.t > 5) continue;
      const double bound = 0.05 * std::abs(rec.row.psi_bar) + cushion;
      b.sample(std::abs(rec.row.psi_bar - rec.oracle_psi_bar) / bound);
    }
    report.checks.push_back(
        b.finish("|estimate - truth| / (0.05 |estimate| + cushion), outer t <= 5"));
  }
  {
    CheckBuilder b("v_ab_estimator", std::max(0.10, stat));
    for (const auto& rec : res.outer) {
      if (rec.t > 10 || rec.v_ab_clamped || !std::isfinite(rec.v_ab_tilde)) continue;
      const double denom = std::max(rec.oracle_v_ab, 1e-15);
      b.sample(std::abs(rec.v_ab_tilde - rec.oracle_v_ab) / denom);
    }
    report.checks.push_back(b.finish("relative error vs ground truth, outer t <= 10"));
  }
  {
    CheckBuilder b("v_ba_estimator", std::max(0.05, 5.0 * v_ba_scale));
    for (const auto& rec : res.outer) {
      if (rec.v_ba_clamped) continue;
      const double denom = std::max(rec.oracle_v_ba, 1e-15);
      b.sample(std::abs(rec.v_ba_tilde - rec.oracle_v_ba) / denom);
    }
    report.checks.push_back(b.finish("relative error vs ground truth, all outer t"));
  }
  {
    CheckBuilder b("decorrelation", std::max(0.05, stat));
    for (const auto& rec : res.outer) {
      if (rec.t > 5) continue;
      if (cold) b.sample(std::abs(rec.oracle_corr_hq));
      else b.check.worst = std::max(b.check.worst, std::abs(rec.oracle_corr_hq));
    }
    report.checks.push_back(b.finish(
        cold ? "normalized <h_t, q_t>, outer t <= 5"
             : "informational for warm-started variants (worst value recorded)"));
  }
  {
    CheckBuilder b("error_gaussianity", 0.3);
    for (const auto& rec : res.outer) {
      if (rec.t > 5) continue;
      if (cold) b.sample(std::abs(rec.oracle_kurt_h));
      else b.check.worst = std::max(b.check.worst, std::abs(rec.oracle_kurt_h));
    }
    report.checks.push_back(b.finish(
        cold ? "excess kurtosis of h_t, outer t <= 5"
             : "informational for warm-started variants (worst value recorded)"));
  }

  report.passed = true;
  for (const auto& c : report.checks) report.passed = report.passed && c.passed;
  return report;
}

} // namespace cgvamp
