#include "cgvamp/core/cg.hpp"

#include <cmath>
#include <limits>

namespace cgvamp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t signal_dim(std::int64_t m, double delta) {
  require(delta > 0.0 && std::isfinite(delta), ErrorCode::invalid_arg,
          "cg: delta must be finite and positive");
  return static_cast<std::int64_t>(std::llround(static_cast<double>(m) / delta));
}

void check_system_scalars(double v_ba_tilde, double v_w_tilde) {
  require(std::isfinite(v_ba_tilde) && v_ba_tilde > 0.0, ErrorCode::invalid_arg,
          "cg: v_ba_tilde must be finite and positive");
  require(std::isfinite(v_w_tilde) && v_w_tilde >= 0.0, ErrorCode::invalid_arg,
          "cg: v_w_tilde must be finite and non-negative");
}

} // namespace

CgState cg_cold_init(const Vec& z, double delta, double v_w_tilde) {
  require(z.allFinite(), ErrorCode::numeric, "cg_cold_init: non-finite z");
  CgState st;
  st.n = signal_dim(z.size(), delta);
  st.delta = delta;
  st.z_norm = z.norm();
  st.mu = Vec::Zero(z.size());
  st.r = z;
  st.p = z;
  st.p_used = Vec::Zero(z.size());
  st.sc.eta_bar = delta * v_w_tilde;  // (1/n) E<w, z> at the start
  return st;
}

void cg_step(CgState& state, const WOp& apply_w, const Vec& z, double v_ba_tilde,
             double v_w_tilde, double delta, double zero_residual_tol) {
  check_system_scalars(v_ba_tilde, v_w_tilde);
  require(z.size() == state.r.size(), ErrorCode::shape, "cg_step: z size mismatch");

  const double r_norm = state.r.norm();
  if (state.zero_residual || r_norm <= zero_residual_tol * state.z_norm) {
    state.zero_residual = true;
    return;
  }

  const Vec d = apply_w(state.p);
  const double pd = state.p.dot(d);
  require(std::isfinite(pd) && pd > 0.0, ErrorCode::numeric,
          "cg_step: <p, W p> not positive; W is not positive definite or inputs degenerate");

  const double rr = state.r.squaredNorm();
  const double a = rr / pd;
  state.p_used = state.p;
  state.mu += a * state.p;
  state.r -= a * d;
  const double rr_new = state.r.squaredNorm();
  const double b = rr_new / rr;

  // Scalar recursions ride along with exactly the step's own quantities.
  const double n = static_cast<double>(state.n);
  const double psi_new = state.sc.psi_bar + a * state.sc.eta_bar;
  const double nu_new = (z.dot(state.mu) / n - psi_new) / v_ba_tilde;
  const double eta_new =
      v_w_tilde * (delta - psi_new - v_ba_tilde * nu_new) + b * state.sc.eta_bar;
  state.sc.psi_bar = psi_new;
  state.sc.nu_bar = nu_new;
  state.sc.eta_bar = eta_new;
  state.sc.zeta += a * a * pd;

  state.p = state.r + b * state.p;
  state.a_last = a;
  state.b_last = b;
  state.i += 1;
}

CgState warm_start_init(const Vec& z, const WarmCarry& carry, const WOp& apply_w,
                        double v_ba_tilde, double v_w_tilde, double delta,
                        double zero_residual_tol) {
  check_system_scalars(v_ba_tilde, v_w_tilde);
  require(z.allFinite(), ErrorCode::numeric, "warm_start_init: non-finite z");
  require(carry.mu.size() == z.size() && carry.p_used.size() == z.size(), ErrorCode::shape,
          "warm_start_init: carryover size mismatch");

  CgState st;
  st.n = signal_dim(z.size(), delta);
  st.delta = delta;
  st.z_norm = z.norm();
  st.warm = true;
  st.mu = carry.mu;
  const Vec w_mu = apply_w(st.mu);
  st.r = z - w_mu;
  st.p = st.r + carry.b * carry.p_used;
  st.p_used = Vec::Zero(z.size());

  // psi_bar transfers exactly (same mu, same w); nu/eta re-derived through one
  // application of their own updates; zeta re-seeded exactly from W mu^0.
  const double n = static_cast<double>(st.n);
  st.sc.psi_bar = carry.psi_bar;
  st.sc.nu_bar = (z.dot(st.mu) / n - st.sc.psi_bar) / v_ba_tilde;
  st.sc.eta_bar = v_w_tilde * (delta - st.sc.psi_bar - v_ba_tilde * st.sc.nu_bar) +
                  carry.b * carry.eta_bar;
  st.sc.zeta = st.mu.dot(w_mu);

  if (st.r.norm() <= zero_residual_tol * st.z_norm) st.zero_residual = true;
  return st;
}

double estimate_gamma(const CgState& state, bool* flagged) {
  if (flagged) *flagged = false;
  if (state.i == 0) {
    if (flagged) *flagged = true;
    return 0.0;
  }
  return -state.sc.nu_bar;
}

double estimate_v_ab(const CgState& state, double v_ba_tilde, double v_w_tilde, double floor,
                     bool* clamped) {
  check_system_scalars(v_ba_tilde, v_w_tilde);
  require(std::isfinite(floor) && floor > 0.0, ErrorCode::invalid_arg,
          "estimate_v_ab: floor must be finite and positive");
  if (clamped) *clamped = false;

  const double numer = state.sc.zeta - v_w_tilde * state.mu.squaredNorm();
  const double gamma = -state.sc.nu_bar;
  double v;
  if (numer == 0.0) {
    v = -v_ba_tilde;  // start of the recursion: mu = 0, zeta = 0
  } else {
    require(gamma != 0.0, ErrorCode::degenerate,
            "estimate_v_ab: gamma estimate is zero with a nonzero numerator");
    v = numer / (static_cast<double>(state.n) * gamma * gamma * v_ba_tilde) - v_ba_tilde;
  }
  if (!(v > floor)) {
    v = floor;
    if (clamped) *clamped = true;
  }
  return v;
}

namespace {

struct InnerDriver {
  const MeasurementOperator& op;
  const Vec& z;
  double v_w;
  double v_ba;
  const AcgConfig& config;
  const WarmCarry* carry;
  const CgObserver& observer;

  AcgResult run(bool adaptive, int fixed_iterations, double prev_v_ab) {
    require(z.size() == op.rows(), ErrorCode::shape, "inner solve: z size mismatch");
    const double delta = op.delta();
    const WOp w = [&](const Vec& u) { return apply_w(op, u, v_w, v_ba); };
    const double floor =
        config.v_ab_floor > 0.0 ? config.v_ab_floor : 1e-12 * v_ba;

    CgState st = carry ? warm_start_init(z, *carry, w, v_ba, v_w, delta,
                                         config.zero_residual_tol)
                       : cg_cold_init(z, delta, v_w);
    const unsigned base_flags = st.warm ? kFlagWarmReseed : 0u;

    AcgResult res;
    double v_prev_inner = kInf;
    double v_last = kInf;
    bool v_last_clamped = false;

    while (true) {
      if (st.zero_residual) break;
      cg_step(st, w, z, v_ba, v_w, delta, config.zero_residual_tol);
      if (st.zero_residual) break;  // pre-step guard fired; nothing advanced
      if (observer) observer(st);

      unsigned flags = base_flags;
      double v_i;
      bool clamped = false;
      if (st.sc.nu_bar == 0.0 && st.sc.zeta - v_w * st.mu.squaredNorm() != 0.0) {
        v_i = kInf;  // gamma degenerate at this step; keep iterating
        flags |= kFlagGammaZero;
      } else {
        v_i = estimate_v_ab(st, v_ba, v_w, floor, &clamped);
        if (clamped) flags |= kFlagVabClamped;
      }
      if (st.r.norm() <= config.zero_residual_tol * st.z_norm) {
        st.zero_residual = true;
        flags |= kFlagZeroResidual;
      }

      res.inner.push_back(InnerRow{st.i, st.a_last, st.b_last, st.sc.psi_bar, st.sc.nu_bar,
                                   st.sc.eta_bar, st.sc.zeta, v_i, flags});
      v_last = v_i;
      v_last_clamped = clamped;
      res.v_ab_clamped = res.v_ab_clamped || clamped;

      if (st.zero_residual) break;
      if (adaptive) {
        if (st.i >= config.i_max) break;
        const double improvement =
            std::isfinite(v_i) ? (v_prev_inner - v_i) / v_i : kInf;
        const bool keep_going =
            improvement > config.delta_threshold || v_i > config.c * prev_v_ab;
        if (!keep_going) break;
        v_prev_inner = v_i;
      } else {
        if (st.i >= fixed_iterations) break;
      }
    }

    res.mu = st.mu;
    res.iterations = st.i;
    res.scalars = st.sc;
    res.gamma_tilde = estimate_gamma(st, &res.gamma_flagged);
    res.zero_residual = st.zero_residual;
    if (st.i > 0 && !std::isfinite(v_last)) {
      fail(ErrorCode::degenerate, "inner solve: variance estimate degenerate at exit");
    }
    res.v_ab_tilde = st.i > 0 ? v_last : kInf;
    res.v_ab_clamped = res.v_ab_clamped || v_last_clamped;
    res.carry = WarmCarry{st.mu, st.p_used, st.b_last, st.sc.psi_bar, st.sc.eta_bar};
    return res;
  }
};

} // namespace

AcgResult run_acg(const MeasurementOperator& op, const Vec& z, double v_w_tilde,
                  double v_ba_tilde, const AcgConfig& config, double prev_v_ab,
                  const WarmCarry* carry, const CgObserver& observer) {
  require(config.i_max >= 1, ErrorCode::invalid_arg, "run_acg: i_max must be >= 1");
  require(config.c > 0.0, ErrorCode::invalid_arg, "run_acg: c must be positive");
  require(prev_v_ab > 0.0, ErrorCode::invalid_arg, "run_acg: prev_v_ab must be positive");
  InnerDriver driver{op, z, v_w_tilde, v_ba_tilde, config, carry, observer};
  return driver.run(true, 0, prev_v_ab);
}

AcgResult run_cg_fixed(const MeasurementOperator& op, const Vec& z, double v_w_tilde,
                       double v_ba_tilde, int iterations, const AcgConfig& config,
                       const WarmCarry* carry, const CgObserver& observer) {
  require(iterations >= 1, ErrorCode::invalid_arg, "run_cg_fixed: iterations must be >= 1");
  InnerDriver driver{op, z, v_w_tilde, v_ba_tilde, config, carry, observer};
  return driver.run(false, iterations, kInf);
}

} // namespace cgvamp
