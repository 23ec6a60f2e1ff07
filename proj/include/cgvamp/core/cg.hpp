#pragma once

#include <functional>
#include <vector>

#include "cgvamp/core/operators.hpp"

namespace cgvamp {

// Applies W = v_w I + v_ba A A^T (or any SPD stand-in under test).
using WOp = std::function<Vec(const Vec&)>;

// Scalars tracked alongside CG. Asymptotically: psi_bar ~ (1/n)<w, mu>,
// nu_bar ~ -gamma_A, eta_bar ~ (1/n)<w, p>, zeta ~ <mu, W mu>.
struct CgScalars {
  double psi_bar = 0.0;
  double nu_bar = 0.0;
  double eta_bar = 0.0;
  double zeta = 0.0;
};

struct CgState {
  std::int64_t n = 0;  // signal dimension, the 1/n normalizer of the recursions
  double delta = 0.0;
  double z_norm = 0.0;
  Vec mu, r, p;
  Vec p_used;  // direction consumed by the latest step; warm-start carryover
  int i = 0;
  double a_last = 0.0;
  double b_last = 0.0;
  CgScalars sc;
  bool warm = false;
  bool zero_residual = false;
};

// State a finished inner solve hands to the next outer iteration's warm start.
struct WarmCarry {
  Vec mu;
  Vec p_used;
  double b = 0.0;
  double psi_bar = 0.0;
  double eta_bar = 0.0;
};

struct AcgConfig {
  double c = 0.9;                  // target variance reduction per outer iteration
  double delta_threshold = 0.015;  // minimum relative improvement to keep iterating;
                                   // +inf disables this criterion
  int i_max = 100;
  double v_ab_floor = -1.0;        // clamp for the variance estimate; <0 -> 1e-12 * v_ba
  double zero_residual_tol = 1e-13;
};

enum InnerFlag : unsigned {
  kFlagVabClamped = 1u << 0,
  kFlagZeroResidual = 1u << 1,
  kFlagWarmReseed = 1u << 2,
  kFlagGammaZero = 1u << 3,
  kFlagGramRidge = 1u << 4,  // outer rows: oracle Gram solve truncated a rank-deficient history
};

struct InnerRow {
  int i = 0;
  double a = 0.0, b = 0.0;
  double psi_bar = 0.0, nu_bar = 0.0, eta_bar = 0.0, zeta = 0.0;
  double v_ab_tilde = 0.0;
  unsigned flags = 0;
};

struct AcgResult {
  Vec mu;
  double gamma_tilde = 0.0;  // -nu_bar at the stopping iteration
  double v_ab_tilde = 0.0;
  int iterations = 0;
  CgScalars scalars;
  std::vector<InnerRow> inner;
  WarmCarry carry;
  bool v_ab_clamped = false;
  bool gamma_flagged = false;
  bool zero_residual = false;
};

// Called after every CG step with the updated state (mu = mu^{i}).
using CgObserver = std::function<void(const CgState&)>;

CgState cg_cold_init(const Vec& z, double delta, double v_w_tilde);

// One CG step plus the scalar recursions. No-op once the residual is
// negligible relative to z (exact fixed point guard).
void cg_step(CgState& state, const WOp& apply_w, const Vec& z, double v_ba_tilde,
             double v_w_tilde, double delta, double zero_residual_tol = 1e-13);

// Continues the previous outer iteration's Krylov recursion against the new
// system: mu^0 = carry.mu, r^0 = z - W mu^0, p^0 = r^0 + carry.b * carry.p_used.
// The scalar recursion is re-seeded from the carried psi_bar/eta_bar (exact for
// psi_bar, approximate overall; callers flag warm rows).
CgState warm_start_init(const Vec& z, const WarmCarry& carry, const WOp& apply_w,
                        double v_ba_tilde, double v_w_tilde, double delta,
                        double zero_residual_tol = 1e-13);

// -nu_bar; 0 with *flagged set before the first step.
double estimate_gamma(const CgState& state, bool* flagged = nullptr);

// (1/n) gamma^{-2} (zeta - v_w ||mu||^2) / v_ba - v_ba, clamped below at
// `floor` (sets *clamped). gamma == 0 with a nonzero numerator is degenerate.
double estimate_v_ab(const CgState& state, double v_ba_tilde, double v_w_tilde, double floor,
                     bool* clamped = nullptr);

// Adaptive inner loop: keeps stepping while i < i_max and (the relative
// improvement of the variance estimate exceeds delta_threshold, or the
// estimate still exceeds c * prev_v_ab). Strict inequalities; pass
// prev_v_ab = +inf on the first outer iteration.
AcgResult run_acg(const MeasurementOperator& op, const Vec& z, double v_w_tilde,
                  double v_ba_tilde, const AcgConfig& config, double prev_v_ab,
                  const WarmCarry* carry = nullptr, const CgObserver& observer = {});

// Fixed inner-iteration-count policy sharing the same bookkeeping.
AcgResult run_cg_fixed(const MeasurementOperator& op, const Vec& z, double v_w_tilde,
                       double v_ba_tilde, int iterations, const AcgConfig& config,
                       const WarmCarry* carry = nullptr, const CgObserver& observer = {});

} // namespace cgvamp
