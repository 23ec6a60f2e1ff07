#pragma once

#include <string>
#include <vector>

#include "cgvamp/core/cg.hpp"

namespace cgvamp {

// One outer iteration. Oracle fields are NaN unless oracle tracing ran.
struct OuterRecord {
  int t = 0;
  int inner_iterations = 0;
  double v_ba_tilde = 0.0;
  int v_ba_clamped = 0;
  double gamma_tilde = 0.0;
  double v_ab_tilde = 0.0;
  int v_ab_clamped = 0;
  double gamma_b = 0.0;
  double nmse = 0.0;  // ||mu_b - x||^2 / ||x||^2
  unsigned flags = 0;
  double block_a_ms = 0.0, block_b_ms = 0.0, cum_ms = 0.0;
  double oracle_v_ba = 0.0;
  double oracle_gamma = 0.0;
  double oracle_v_ab = 0.0;
  double oracle_corr_hq = 0.0;   // normalized <h_t, q_t>
  double oracle_corr_max = 0.0;  // max over tau <= t of |normalized <h_t, q_tau>|
  double oracle_kurt_h = 0.0;    // excess kurtosis of h_t
};

// One CG iteration inside outer iteration t. Oracle fields NaN unless traced:
// oracle_nu_bar = -(1/(n v_ba_tilde)) <q_t, A^T mu^i>, oracle_psi_bar = (1/n)<w, mu^i>.
// oracle_nu_bar shares the run's v_ba estimate as normalizer so that
// nu_bar vs oracle_nu_bar isolates the recursion; v_ba estimation quality
// is audited through oracle_v_ba on the outer rows.
struct InnerRecord {
  int t = 0;
  InnerRow row;
  double oracle_nu_bar = 0.0;
  double oracle_psi_bar = 0.0;
};

struct RunResult {
  std::vector<OuterRecord> outer;
  std::vector<InnerRecord> inner;
  Vec x_hat;  // final denoised estimate
  bool with_oracle = false;
  bool with_timings = true;
  bool ok = true;
  ErrorCode error_code = ErrorCode::internal;
  std::string error;
};

// Versioned CSV with a leading `# cgvamp-trace v1` comment row. Numbers are
// written with shortest round-trip formatting, so re-reads are exact.
void write_outer_csv(const RunResult& result, const std::string& path);
void write_inner_csv(const RunResult& result, const std::string& path);

std::vector<std::string> outer_columns(bool with_oracle, bool with_timings);
std::vector<std::string> inner_columns(bool with_oracle);
double outer_value(const OuterRecord& rec, const std::string& column);
double inner_value(const InnerRecord& rec, const std::string& column);

std::string format_double(double v);

} // namespace cgvamp
