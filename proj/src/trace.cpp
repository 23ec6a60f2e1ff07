#include "cgvamp/core/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace cgvamp {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> outer_columns(bool with_oracle, bool with_timings) {
  std::vector<std::string> cols = {"t",          "inner_iterations", "v_ba_tilde",
                                   "v_ba_clamped", "gamma_tilde",    "v_ab_tilde",
                                   "v_ab_clamped", "gamma_b",        "nmse",
                                   "nmse_db",      "flags"};
  if (with_timings) {
    cols.insert(cols.end(), {"block_a_ms", "block_b_ms", "cum_ms"});
  }
  if (with_oracle) {
    cols.insert(cols.end(), {"oracle_v_ba", "oracle_gamma", "oracle_v_ab", "oracle_corr_hq",
                             "oracle_corr_max", "oracle_kurt_h"});
  }
  return cols;
}

std::vector<std::string> inner_columns(bool with_oracle) {
  std::vector<std::string> cols = {"t",      "i",       "a",    "b",          "psi_bar",
                                   "nu_bar", "eta_bar", "zeta", "v_ab_tilde", "flags"};
  if (with_oracle) cols.insert(cols.end(), {"oracle_nu_bar", "oracle_psi_bar"});
  return cols;
}

double outer_value(const OuterRecord& r, const std::string& c) {
  if (c == "t") return r.t;
  if (c == "inner_iterations") return r.inner_iterations;
  if (c == "v_ba_tilde") return r.v_ba_tilde;
  if (c == "v_ba_clamped") return r.v_ba_clamped;
  if (c == "gamma_tilde") return r.gamma_tilde;
  if (c == "v_ab_tilde") return r.v_ab_tilde;
  if (c == "v_ab_clamped") return r.v_ab_clamped;
  if (c == "gamma_b") return r.gamma_b;
  if (c == "nmse") return r.nmse;
  if (c == "nmse_db") return 10.0 * std::log10(r.nmse);
  if (c == "flags") return r.flags;
  if (c == "block_a_ms") return r.block_a_ms;
  if (c == "block_b_ms") return r.block_b_ms;
  if (c == "cum_ms") return r.cum_ms;
  if (c == "oracle_v_ba") return r.oracle_v_ba;
  if (c == "oracle_gamma") return r.oracle_gamma;
  if (c == "oracle_v_ab") return r.oracle_v_ab;
  if (c == "oracle_corr_hq") return r.oracle_corr_hq;
  if (c == "oracle_corr_max") return r.oracle_corr_max;
  if (c == "oracle_kurt_h") return r.oracle_kurt_h;
  fail(ErrorCode::invalid_arg, "unknown outer trace column '" + c + "'");
}

double inner_value(const InnerRecord& r, const std::string& c) {
  if (c == "t") return r.t;
  if (c == "i") return r.row.i;
  if (c == "a") return r.row.a;
  if (c == "b") return r.row.b;
  if (c == "psi_bar") return r.row.psi_bar;
  if (c == "nu_bar") return r.row.nu_bar;
  if (c == "eta_bar") return r.row.eta_bar;
  if (c == "zeta") return r.row.zeta;
  if (c == "v_ab_tilde") return r.row.v_ab_tilde;
  if (c == "flags") return r.row.flags;
  if (c == "oracle_nu_bar") return r.oracle_nu_bar;
  if (c == "oracle_psi_bar") return r.oracle_psi_bar;
  fail(ErrorCode::invalid_arg, "unknown inner trace column '" + c + "'");
}

namespace {

template <typename Rec>
void write_csv(const std::string& path, const std::vector<std::string>& cols,
               const std::vector<Rec>& rows, double (*get)(const Rec&, const std::string&)) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open '" + path + "' for writing");
  out << "# cgvamp-trace v1\n";
  for (size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
  out << "\n";
  for (const Rec& r : rows) {
    for (size_t c = 0; c < cols.size(); ++c)
      out << (c ? "," : "") << format_double(get(r, cols[c]));
    out << "\n";
  }
  require(out.good(), ErrorCode::io, "write failed for '" + path + "'");
}

} // namespace

void write_outer_csv(const RunResult& result, const std::string& path) {
  write_csv(path, outer_columns(result.with_oracle, result.with_timings), result.outer,
            &outer_value);
}

void write_inner_csv(const RunResult& result, const std::string& path) {
  write_csv(path, inner_columns(result.with_oracle), result.inner, &inner_value);
}

} // namespace cgvamp
