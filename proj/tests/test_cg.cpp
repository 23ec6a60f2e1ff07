#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "cgvamp/core/cg.hpp"
#include "cgvamp/core/oracle.hpp"
#include "cgvamp/core/rng.hpp"

using namespace cgvamp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec gauss_vec(std::int64_t n, double scale, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::noise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(n);
  for (std::int64_t k = 0; k < n; ++k) v[k] = scale * gauss(rng);
  return v;
}

OperatorSpec spec_of(const std::string& kind, std::int64_t n, std::int64_t m, double kappa,
                     std::uint64_t seed) {
  OperatorSpec s;
  s.kind = kind;
  s.n = n;
  s.m = m;
  s.kappa = kappa;
  s.seed = seed;
  return s;
}

// z drawn from the statistics the in-loop recursions assume: z = A q + w with
// isotropic q and w at the given variances.
Vec draw_z(const MeasurementOperator& op, double v_ba, double v_w, std::uint64_t seed) {
  const Vec q = gauss_vec(op.cols(), std::sqrt(v_ba), seed);
  const Vec w = gauss_vec(op.rows(), std::sqrt(v_w), seed + 1000);
  return op.apply(q) + w;
}

WOp w_of(const MeasurementOperator& op, double v_w, double v_ba) {
  return [&op, v_w, v_ba](const Vec& u) { return apply_w(op, u, v_w, v_ba); };
}

} // namespace

TEST_CASE("cold start seeds the recursions exactly") {
  const Vec z = gauss_vec(64, 1.0, 1);
  const CgState st = cg_cold_init(z, 0.25, 4.0);
  CHECK(st.n == 256);
  CHECK(st.sc.psi_bar == 0.0);
  CHECK(st.sc.nu_bar == 0.0);
  CHECK(st.sc.eta_bar == 1.0);  // delta * v_w
  CHECK(st.sc.zeta == 0.0);
  CHECK(st.mu.isZero(0.0));
  CHECK(st.r == z);
  CHECK(st.p == z);
  CHECK(st.i == 0);
}

TEST_CASE("identity system is solved in a single step") {
  const Vec z = gauss_vec(32, 1.0, 2);
  CgState st = cg_cold_init(z, 0.5, 1.0);
  const WOp identity = [](const Vec& u) { return u; };
  cg_step(st, identity, z, 1.0, 1.0, 0.5);
  CHECK(st.i == 1);
  CHECK(st.a_last == doctest::Approx(1.0).epsilon(1e-14));
  CHECK((st.mu - z).norm() <= 1e-14 * z.norm());
  CHECK(st.r.norm() <= 1e-14 * z.norm());
  cg_step(st, identity, z, 1.0, 1.0, 0.5);  // residual gone: a no-op
  CHECK(st.zero_residual);
  CHECK(st.i == 1);
}

TEST_CASE("indefinite systems are refused") {
  const Vec z = gauss_vec(16, 1.0, 3);
  CgState st = cg_cold_init(z, 0.5, 1.0);
  const WOp negated = [](const Vec& u) { return Vec(-u); };
  CHECK_THROWS_AS(cg_step(st, negated, z, 1.0, 1.0, 0.5), Error);
}

TEST_CASE("finite termination reaches the exact solve") {
  DenseOperator op(spec_of("dense", 256, 64, 10.0, 4));
  const double v_w = 0.1, v_ba = 1.0;
  const Vec z = draw_z(op, v_ba, v_w, 5);
  const WOp w = w_of(op, v_w, v_ba);

  CgState st = cg_cold_init(z, op.delta(), v_w);
  for (int i = 0; i < 64; ++i) cg_step(st, w, z, v_ba, v_w, op.delta());
  CHECK((z - w(st.mu)).norm() <= 1e-8 * z.norm());

  const Vec exact = exact_lmmse(z, op, v_w, v_ba);
  CHECK((st.mu - exact).norm() <= 1e-6 * exact.norm());
}

TEST_CASE("tracked residual matches z - W mu at every step") {
  auto op = build_operator(spec_of("fijl", 512, 128, 100.0, 6));
  const double v_w = 0.04, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 7);
  const WOp w = w_of(*op, v_w, v_ba);
  CgState st = cg_cold_init(z, op->delta(), v_w);
  for (int i = 0; i < 20; ++i) {
    cg_step(st, w, z, v_ba, v_w, op->delta());
    CHECK((z - w(st.mu) - st.r).norm() <= 1e-8 * z.norm());
  }
}

TEST_CASE("mu accumulates exactly the stepped directions") {
  auto op = build_operator(spec_of("fijl", 512, 128, 100.0, 8));
  const double v_w = 0.04, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 9);
  const WOp w = w_of(*op, v_w, v_ba);
  CgState st = cg_cold_init(z, op->delta(), v_w);
  Vec rebuilt = Vec::Zero(128);
  for (int i = 0; i < 15; ++i) {
    cg_step(st, w, z, v_ba, v_w, op->delta());
    rebuilt += st.a_last * st.p_used;
    CHECK((st.mu - rebuilt).norm() <= 1e-10 * rebuilt.norm());
  }
}

TEST_CASE("the energy recursion equals mu^T W mu and never decreases") {
  auto op = build_operator(spec_of("fijl", 512, 128, 100.0, 10));
  const double v_w = 0.04, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 11);
  const WOp w = w_of(*op, v_w, v_ba);
  CgState st = cg_cold_init(z, op->delta(), v_w);
  double zeta_prev = 0.0;
  for (int i = 0; i < 20; ++i) {
    cg_step(st, w, z, v_ba, v_w, op->delta());
    const double direct = st.mu.dot(w(st.mu));
    CHECK(std::abs(st.sc.zeta - direct) <= 1e-10 * direct);
    CHECK(st.sc.zeta >= zeta_prev);
    zeta_prev = st.sc.zeta;
  }
}

TEST_CASE("cold directions stay W-conjugate") {
  auto op = build_operator(spec_of("fijl", 512, 128, 100.0, 12));
  const double v_w = 0.04, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 13);
  const WOp w = w_of(*op, v_w, v_ba);
  CgState st = cg_cold_init(z, op->delta(), v_w);
  std::vector<Vec> dirs;
  for (int i = 0; i < 10; ++i) {
    cg_step(st, w, z, v_ba, v_w, op->delta());
    dirs.push_back(st.p_used);
  }
  std::vector<Vec> wdirs;
  std::vector<double> self;
  for (const auto& p : dirs) {
    wdirs.push_back(w(p));
    self.push_back(std::sqrt(p.dot(wdirs.back())));
  }
  for (size_t i = 0; i < dirs.size(); ++i)
    for (size_t j = i + 1; j < dirs.size(); ++j) {
      const double cross = std::abs(dirs[i].dot(wdirs[j]));
      CHECK(cross / (self[i] * self[j]) <= 1e-4);
    }
}

TEST_CASE("correction scalar is zero and flagged before the first step") {
  const Vec z = gauss_vec(16, 1.0, 14);
  const CgState st = cg_cold_init(z, 0.25, 1.0);
  bool flagged = false;
  CHECK(estimate_gamma(st, &flagged) == 0.0);
  CHECK(flagged);
}

TEST_CASE("correction scalar is minus the tracked recursion value") {
  auto op = build_operator(spec_of("fijl", 256, 64, 10.0, 15));
  const double v_w = 0.05, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 16);
  const WOp w = w_of(*op, v_w, v_ba);
  CgState st = cg_cold_init(z, op->delta(), v_w);
  for (int i = 0; i < 5; ++i) cg_step(st, w, z, v_ba, v_w, op->delta());
  bool flagged = true;
  CHECK(estimate_gamma(st, &flagged) == -st.sc.nu_bar);
  CHECK_FALSE(flagged);
}

TEST_CASE("fully converged solve recovers the trace of the filtered system") {
  // At convergence mu = W^{-1} z, and for z = A q + w the recursion's value
  // concentrates on (1/n) Tr{A^T W^{-1} A} = (1/n) sum s^2 / (v_w + v_ba s^2).
  auto op = build_operator(spec_of("fijl", 16384, 4096, 100.0, 17));
  const double v_w = 0.01, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 18);
  AcgConfig cfg;
  const AcgResult res = run_cg_fixed(*op, z, v_w, v_ba, 4096, cfg);
  CHECK(res.zero_residual);

  const Vec& s = op->spectrum();
  double trace = 0.0;
  for (int k = 0; k < s.size(); ++k)
    trace += s[k] * s[k] / (v_w + v_ba * s[k] * s[k]);
  trace /= static_cast<double>(op->cols());
  // The quadratic form fluctuates at ~sqrt(2/m) relative std on one draw;
  // 8% is a three-sigma band at this size.
  CHECK(std::abs(res.scalars.nu_bar - trace) <= 0.08 * trace);
  CHECK(res.gamma_tilde == -res.scalars.nu_bar);
}

TEST_CASE("variance estimate clamps and flags before any step") {
  const Vec z = gauss_vec(16, 1.0, 19);
  const CgState st = cg_cold_init(z, 0.25, 1.0);
  bool clamped = false;
  CHECK(estimate_v_ab(st, 1.0, 1.0, 1e-10, &clamped) == 1e-10);
  CHECK(clamped);
}

TEST_CASE("variance estimate rejects a non-positive floor") {
  const Vec z = gauss_vec(16, 1.0, 20);
  const CgState st = cg_cold_init(z, 0.25, 1.0);
  CHECK_THROWS_AS(estimate_v_ab(st, 1.0, 1.0, 0.0, nullptr), Error);
}

TEST_CASE("energy identity ties the two variance formulas together") {
  // (zeta - v_w ||mu||^2) / v_ba = ||A^T mu||^2 for cold starts, so the
  // prior-free form of the variance estimate is the same number.
  auto op = build_operator(spec_of("fijl", 512, 128, 100.0, 21));
  const double v_w = 0.04, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 22);
  const WOp w = w_of(*op, v_w, v_ba);
  CgState st = cg_cold_init(z, op->delta(), v_w);
  for (int i = 0; i < 20; ++i) {
    cg_step(st, w, z, v_ba, v_w, op->delta());
    const double lhs = (st.sc.zeta - v_w * st.mu.squaredNorm()) / v_ba;
    const double rhs = op->apply_adjoint(st.mu).squaredNorm();
    CHECK(std::abs(lhs - rhs) <= 1e-10 * rhs);
  }
}

TEST_CASE("zero carryover warm start replays the cold start bit for bit") {
  auto op = build_operator(spec_of("fijl", 256, 64, 10.0, 23));
  const double v_w = 0.05, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 24);
  const WOp w = w_of(*op, v_w, v_ba);

  CgState cold = cg_cold_init(z, op->delta(), v_w);
  WarmCarry zero;
  zero.mu = Vec::Zero(64);
  zero.p_used = Vec::Zero(64);
  zero.b = 0.0;
  zero.psi_bar = 0.0;
  zero.eta_bar = op->delta() * v_w;
  CgState warm = warm_start_init(z, zero, w, v_ba, v_w, op->delta());
  CHECK(warm.warm);

  for (int i = 0; i < 5; ++i) {
    cg_step(cold, w, z, v_ba, v_w, op->delta());
    cg_step(warm, w, z, v_ba, v_w, op->delta());
  }
  CHECK(warm.mu == cold.mu);
  CHECK(warm.sc.psi_bar == cold.sc.psi_bar);
  CHECK(warm.sc.nu_bar == cold.sc.nu_bar);
  CHECK(warm.sc.zeta == cold.sc.zeta);
}

TEST_CASE("warm start against the same system continues the Krylov recursion") {
  auto op = build_operator(spec_of("fijl", 512, 128, 50.0, 25));
  const double v_w = 0.04, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 26);
  AcgConfig cfg;

  const AcgResult first = run_cg_fixed(*op, z, v_w, v_ba, 6, cfg);
  const AcgResult second = run_cg_fixed(*op, z, v_w, v_ba, 6, cfg, &first.carry);
  const AcgResult straight = run_cg_fixed(*op, z, v_w, v_ba, 12, cfg);

  REQUIRE(second.iterations == 6);
  REQUIRE(straight.iterations == 12);
  CHECK((second.mu - straight.mu).norm() <= 1e-8 * straight.mu.norm());
}

TEST_CASE("adaptive stop with both criteria disabled takes exactly one step") {
  auto op = build_operator(spec_of("fijl", 256, 64, 10.0, 27));
  const double v_w = 0.05, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 28);
  AcgConfig cfg;
  cfg.delta_threshold = kInf;  // improvement branch can never fire
  const AcgResult res = run_acg(*op, z, v_w, v_ba, cfg, kInf);
  CHECK(res.iterations == 1);
  REQUIRE(res.inner.size() == 1);
  CHECK(res.inner[0].i == 1);
}

TEST_CASE("adaptive stop runs to the iteration cap when improvement always counts") {
  auto op = build_operator(spec_of("fijl", 256, 64, 100.0, 29));
  const double v_w = 0.05, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 30);
  AcgConfig cfg;
  cfg.delta_threshold = -kInf;
  cfg.i_max = 7;
  const AcgResult res = run_acg(*op, z, v_w, v_ba, cfg, kInf);
  CHECK(res.iterations == 7);
}

TEST_CASE("adaptive stop keeps going while the variance target is missed") {
  auto op = build_operator(spec_of("fijl", 512, 128, 1000.0, 31));
  const double v_w = 0.01, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 32);
  AcgConfig cfg;
  cfg.delta_threshold = kInf;  // only the c * prev_v_ab branch is live
  cfg.c = 1e-12;               // unreachable target: run to the cap
  cfg.i_max = 25;
  const AcgResult res = run_acg(*op, z, v_w, v_ba, cfg, 1.0);
  CHECK(res.iterations == 25);
}

TEST_CASE("adaptive stop validates its inputs") {
  auto op = build_operator(spec_of("fijl", 64, 16, 2.0, 33));
  const Vec z = draw_z(*op, 1.0, 0.1, 34);
  AcgConfig cfg;
  cfg.i_max = 0;
  CHECK_THROWS_AS(run_acg(*op, z, 0.1, 1.0, cfg, kInf), Error);
  cfg.i_max = 10;
  cfg.c = 0.0;
  CHECK_THROWS_AS(run_acg(*op, z, 0.1, 1.0, cfg, kInf), Error);
  cfg.c = 0.9;
  CHECK_THROWS_AS(run_acg(*op, z, 0.1, 1.0, cfg, 0.0), Error);
  CHECK_THROWS_AS(run_cg_fixed(*op, z, 0.1, 1.0, 0, cfg), Error);
}

TEST_CASE("inner rows record the per-step recursion values") {
  auto op = build_operator(spec_of("fijl", 256, 64, 10.0, 35));
  const double v_w = 0.05, v_ba = 1.0;
  const Vec z = draw_z(*op, v_ba, v_w, 36);
  AcgConfig cfg;
  const AcgResult res = run_cg_fixed(*op, z, v_w, v_ba, 8, cfg);
  REQUIRE(res.inner.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(res.inner[i].i == i + 1);
    CHECK(res.inner[i].a > 0.0);
    CHECK(res.inner[i].zeta > 0.0);
  }
  CHECK(res.scalars.nu_bar == res.inner.back().nu_bar);
  CHECK(res.v_ab_tilde == res.inner.back().v_ab_tilde);
}
