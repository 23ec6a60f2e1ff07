#pragma once

#include "cgvamp/core/config.hpp"
#include "cgvamp/core/trace.hpp"

namespace cgvamp {

// (1/n)||z||^2 - delta * v_w_tilde for a trace-normalized operator; negative
// values clamp to a small positive floor with *clamped set. Exact zero inputs
// return 0.
double estimate_v_ba(const Vec& z, double v_w_tilde, double delta, bool* clamped = nullptr);

struct BlockAResult {
  Vec z;        // y - A x_ba
  Vec mu;       // inner solve output
  Vec at_mu;    // A^T mu
  Vec x_ab;     // extrinsic mean toward Block B
  double v_ba_tilde = 0.0;
  bool v_ba_clamped = false;
  double gamma_tilde = 0.0;
  double v_ab_tilde = 0.0;
  bool v_ab_clamped = false;
  int iterations = 0;
  std::vector<InnerRow> inner;
  WarmCarry carry;
  bool zero_residual = false;
};

// LMMSE side of one outer iteration: forms z, estimates v_ba, runs the inner
// solve (warm when carry != nullptr), applies the extrinsic update
// x_ab = x_ba - (1/gamma_tilde) A^T mu.
BlockAResult block_a(const MeasurementOperator& op, const Vec& y, const Vec& x_ba,
                     double v_w_tilde, const InnerPolicy& policy, double prev_v_ab,
                     const WarmCarry* carry = nullptr, double v_ab_floor = -1.0,
                     const CgObserver& observer = {});

struct WsOracleUpdate {
  Vec x_ab;
  Vec gammas;  // correction coefficients, one per history entry (oldest first)
  bool regularized = false;
};

// Multi-term extrinsic update with ground-truth x supplying the error
// directions: projects at_mu onto a direction-gated window of recent history
// errors {q_tau}, negates the least-squares coefficients into corrections, and
// returns x_ab = (sum_tau gamma_tau x_ba^tau + at_mu) / sum_tau gamma_tau.
// The sum is self-normalizing for any kept subset; gammas stays full-length
// with zeros at dropped columns, and regularized reports any drop.
WsOracleUpdate ws_oracle_update_x_ab(const std::vector<Vec>& x_ba_history, const Vec& x,
                                     const Vec& at_mu);

RunResult run(const RunConfig& config, const SystemInstance& instance);

} // namespace cgvamp
