#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cgvamp/core/outer_loop.hpp"
#include "cgvamp/core/rng.hpp"

using namespace cgvamp;

namespace {

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

RunConfig base_config(std::int64_t n, std::int64_t m, double kappa, std::uint64_t seed) {
  RunConfig cfg;
  cfg.op = spec_of("fijl", n, m, kappa, seed);
  cfg.signal.kind = "bernoulli_gaussian";
  cfg.signal.sparsity = 0.1;
  cfg.signal.seed = seed + 1;
  cfg.noise.snr_db = 30.0;
  cfg.noise.seed = seed + 2;
  cfg.denoiser.kind = "soft_threshold";
  cfg.denoiser.lambda_mult = 1.4;
  cfg.denoiser.divergence = "analytic";
  cfg.algorithm.variant = "cgvamp";
  cfg.algorithm.inner.mode = InnerPolicy::Mode::fixed;
  cfg.algorithm.inner.fixed_iterations = 5;
  cfg.algorithm.t_max = 4;
  cfg.algorithm.epsilon = 0.0;
  cfg.trace.oracle = false;
  cfg.trace.include_timings = false;
  return cfg;
}

SystemInstance instance_of(const RunConfig& cfg) {
  return SystemInstance::make(build_operator(cfg.op), cfg.signal, cfg.noise);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("v_ba estimate recovers a planted error variance") {
  const auto op = build_operator(spec_of("fijl", 16384, 4096, 2.0, 11));
  const double v_ba = 0.7, v_w = 0.1;
  double mean_rel = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const Vec q = gauss_vec(op->cols(), std::sqrt(v_ba), 100 + s);
    const Vec w = gauss_vec(op->rows(), std::sqrt(v_w), 200 + s);
    const Vec z = op->apply(q) + w;
    bool clamped = true;
    const double est = estimate_v_ba(z, v_w, op->delta(), &clamped);
    CHECK(!clamped);
    const double rel = std::abs(est - v_ba) / v_ba;
    CHECK(rel < 0.08);
    mean_rel += rel / 3.0;
  }
  CHECK(mean_rel < 0.05);
}

TEST_CASE("v_ba estimate on pure noise stays near zero") {
  const std::int64_t n = 16384, m = 4096;
  const double v_w = 0.25, delta = 0.25;
  const Vec w = gauss_vec(m, std::sqrt(v_w), 7);
  const double est = estimate_v_ba(w, v_w, delta);
  CHECK(est >= 0.0);
  CHECK(est < 0.05 * delta * v_w);
  (void)n;
}

TEST_CASE("v_ba estimate edge cases: exact zero and negative clamp") {
  const Vec zero = Vec::Zero(64);
  bool clamped = true;
  CHECK(estimate_v_ba(zero, 0.0, 0.25, &clamped) == 0.0);
  CHECK(!clamped);

  // Tiny measurement power against a large noise floor forces the clamp.
  const Vec tiny = Vec::Constant(64, 1e-6);
  const double est = estimate_v_ba(tiny, 4.0, 0.25, &clamped);
  CHECK(clamped);
  CHECK(est > 0.0);
  CHECK(est < 1e-10);
}

TEST_CASE("block_a outputs satisfy their defining relations") {
  RunConfig cfg = base_config(2048, 512, 10.0, 21);
  const SystemInstance inst = instance_of(cfg);
  const Vec x_ba = Vec::Zero(inst.n());
  InnerPolicy policy;
  policy.mode = InnerPolicy::Mode::fixed;
  policy.fixed_iterations = 8;

  const BlockAResult a =
      block_a(*inst.op, inst.y, x_ba, inst.v_w, policy, 1.0, nullptr, 1e-12);

  CHECK(a.iterations == 8);
  CHECK(a.inner.size() == 8);
  CHECK((a.z - inst.y).norm() <= 1e-15 * inst.y.norm());

  bool clamped = true;
  const double v_ba = estimate_v_ba(a.z, inst.v_w, inst.delta(), &clamped);
  CHECK(a.v_ba_tilde == v_ba);
  CHECK(a.v_ba_clamped == clamped);

  CHECK(a.gamma_tilde == -a.inner.back().nu_bar);
  CHECK(a.v_ab_tilde == a.inner.back().v_ab_tilde);

  const Vec at_mu = inst.op->apply_adjoint(a.mu);
  CHECK((a.at_mu - at_mu).norm() <= 1e-15 * at_mu.norm());

  const Vec x_ab = x_ba - a.at_mu / a.gamma_tilde;
  CHECK((a.x_ab - x_ab).norm() <= 1e-14 * x_ab.norm());
}

TEST_CASE("block_a run to full Krylov dimension matches the direct solve") {
  RunConfig cfg = base_config(256, 64, 10.0, 3);
  cfg.op.kind = "dense";
  cfg.noise.snr_db = 25.0;
  const SystemInstance inst = instance_of(cfg);
  const Vec x_ba = Vec::Zero(inst.n());
  InnerPolicy policy;
  policy.mode = InnerPolicy::Mode::fixed;
  policy.fixed_iterations = 64;

  const BlockAResult a =
      block_a(*inst.op, inst.y, x_ba, inst.v_w, policy, 1.0, nullptr, 1e-12);

  const auto& dense = dynamic_cast<const DenseOperator&>(*inst.op);
  const Vec mu_exact = exact_lmmse(a.z, dense, inst.v_w, a.v_ba_tilde);
  CHECK((a.mu - mu_exact).norm() <= 1e-6 * mu_exact.norm());
}

TEST_CASE("block_a refuses a zero residual system") {
  const auto op = build_operator(spec_of("fijl", 256, 64, 4.0, 5));
  const Vec x_ba = gauss_vec(256, 1.0, 9);
  const Vec y = op->apply(x_ba);  // z = y - A x_ba is exactly zero
  InnerPolicy policy;
  policy.mode = InnerPolicy::Mode::fixed;
  policy.fixed_iterations = 2;
  CHECK_THROWS_AS(block_a(*op, y, x_ba, 0.0, policy, 1.0, nullptr, 1e-12), Error);
}

TEST_CASE("history oracle update with one entry reduces to the scalar form") {
  const std::int64_t n = 512;
  const Vec x = gauss_vec(n, 1.0, 31);
  const Vec x_ba = gauss_vec(n, 1.0, 32);
  const Vec at_mu = gauss_vec(n, 1.0, 33);

  const WsOracleUpdate upd = ws_oracle_update_x_ab({x_ba}, x, at_mu);

  const Vec q = x_ba - x;
  const double gamma0 = -q.dot(at_mu) / q.squaredNorm();
  CHECK(upd.gammas.size() == 1);
  CHECK(upd.gammas[0] == doctest::Approx(gamma0).epsilon(1e-12));
  CHECK(!upd.regularized);

  const Vec expect = (gamma0 * x_ba + at_mu) / gamma0;
  CHECK((upd.x_ab - expect).norm() <= 1e-10 * expect.norm());
}

TEST_CASE("history oracle update decorrelates against every admitted direction") {
  const std::int64_t n = 512;
  const Vec x = gauss_vec(n, 1.0, 41);
  std::vector<Vec> history;
  for (std::uint64_t k = 0; k < 2; ++k) history.push_back(x + gauss_vec(n, 0.5, 42 + k));
  const Vec at_mu = gauss_vec(n, 1.0, 49);

  const WsOracleUpdate upd = ws_oracle_update_x_ab(history, x, at_mu);
  CHECK(upd.gammas.size() == 2);
  CHECK(!upd.regularized);
  CHECK(upd.gammas[0] != 0.0);
  CHECK(upd.gammas[1] != 0.0);

  const Vec r = upd.x_ab - x;
  for (const Vec& h : history) {
    const Vec q = h - x;
    CHECK(std::abs(q.dot(r)) <= 1e-9 * q.norm() * r.norm());
  }
}

TEST_CASE("history oracle update windows out stale columns, newest kept first") {
  const std::int64_t n = 512;
  const Vec x = gauss_vec(n, 1.0, 41);
  std::vector<Vec> history;
  for (std::uint64_t k = 0; k < 3; ++k) history.push_back(x + gauss_vec(n, 0.5, 42 + k));
  const Vec at_mu = gauss_vec(n, 1.0, 49);

  const WsOracleUpdate upd = ws_oracle_update_x_ab(history, x, at_mu);
  CHECK(upd.gammas.size() == 3);
  CHECK(upd.gammas[0] == 0.0);  // oldest falls outside the window
  CHECK(upd.gammas[1] != 0.0);
  CHECK(upd.gammas[2] != 0.0);
  CHECK(!upd.regularized);  // a cap exit is routine, not a degeneracy event

  const Vec r = upd.x_ab - x;
  for (size_t k = 1; k < history.size(); ++k) {
    const Vec q = history[k] - x;
    CHECK(std::abs(q.dot(r)) <= 1e-9 * q.norm() * r.norm());
  }
}

TEST_CASE("history oracle update regularizes a singular Gram matrix") {
  const std::int64_t n = 128;
  const Vec x = gauss_vec(n, 1.0, 51);
  const Vec x_ba = gauss_vec(n, 1.0, 52);
  const Vec at_mu = gauss_vec(n, 1.0, 53);

  const WsOracleUpdate upd = ws_oracle_update_x_ab({x_ba, x_ba}, x, at_mu);
  CHECK(upd.regularized);
  CHECK(upd.x_ab.allFinite());
}

TEST_CASE("run produces the requested number of iterations and a converging trace") {
  RunConfig cfg = base_config(1024, 256, 10.0, 61);
  const SystemInstance inst = instance_of(cfg);
  const RunResult res = run(cfg, inst);

  REQUIRE(res.ok);
  CHECK(res.error.empty());
  REQUIRE(res.outer.size() == 4);
  REQUIRE(res.inner.size() == 20);
  CHECK(res.x_hat.size() == 1024);
  CHECK(!res.with_oracle);
  CHECK(!res.with_timings);

  for (int t = 0; t < 4; ++t) {
    const OuterRecord& rec = res.outer[t];
    CHECK(rec.t == t);
    CHECK(rec.inner_iterations == 5);
    CHECK(std::isfinite(rec.nmse));
    CHECK(rec.nmse > 0.0);
    CHECK(std::isnan(rec.oracle_v_ba));
    CHECK(std::isnan(rec.oracle_corr_hq));
    CHECK((rec.flags & kFlagWarmReseed) == 0);
    // Timings are measured regardless; the flag only gates CSV columns.
    CHECK(rec.cum_ms >= 0.0);
  }
  for (std::size_t k = 0; k < res.inner.size(); ++k) {
    CHECK(res.inner[k].t == static_cast<int>(k / 5));
    CHECK(res.inner[k].row.i == static_cast<int>(k % 5) + 1);
    CHECK(std::isnan(res.inner[k].oracle_nu_bar));
  }
  CHECK(res.outer.back().nmse < res.outer.front().nmse);
}

TEST_CASE("oracle tracing fills ground-truth columns") {
  RunConfig cfg = base_config(1024, 256, 10.0, 71);
  cfg.trace.oracle = true;
  cfg.algorithm.t_max = 3;
  const SystemInstance inst = instance_of(cfg);
  const RunResult res = run(cfg, inst);

  REQUIRE(res.ok);
  CHECK(res.with_oracle);
  REQUIRE(res.outer.size() == 3);

  // x_ba starts at zero, so the first error variance is the signal power.
  const double x_power = inst.x.squaredNorm() / static_cast<double>(inst.n());
  CHECK(res.outer[0].oracle_v_ba == doctest::Approx(x_power).epsilon(1e-12));
  CHECK(res.outer[0].oracle_corr_max ==
        doctest::Approx(std::abs(res.outer[0].oracle_corr_hq)).epsilon(1e-12));

  for (const OuterRecord& rec : res.outer) {
    CHECK(std::isfinite(rec.oracle_v_ba));
    CHECK(rec.oracle_v_ba > 0.0);
    CHECK(std::isfinite(rec.oracle_gamma));
    CHECK(std::isfinite(rec.oracle_v_ab));
    CHECK(std::abs(rec.oracle_corr_hq) <= 1.0 + 1e-12);
    CHECK(std::isfinite(rec.oracle_kurt_h));
  }
  for (const InnerRecord& ir : res.inner) {
    CHECK(std::isfinite(ir.oracle_nu_bar));
    CHECK(std::isfinite(ir.oracle_psi_bar));
  }
}

TEST_CASE("warm variants re-seed from the second outer iteration on") {
  RunConfig cfg = base_config(1024, 256, 10.0, 81);
  cfg.algorithm.variant = "ws_practical";
  cfg.algorithm.inner.fixed_iterations = 3;
  cfg.algorithm.t_max = 3;
  const SystemInstance inst = instance_of(cfg);
  const RunResult res = run(cfg, inst);

  REQUIRE(res.ok);
  REQUIRE(res.outer.size() == 3);
  CHECK((res.outer[0].flags & kFlagWarmReseed) == 0);
  CHECK((res.outer[1].flags & kFlagWarmReseed) != 0);
  CHECK((res.outer[2].flags & kFlagWarmReseed) != 0);
  // First inner row of t=1 carries the re-seed flag.
  REQUIRE(res.inner.size() == 9);
  CHECK((res.inner[3].row.flags & kFlagWarmReseed) != 0);
}

TEST_CASE("epsilon stop ends the run before t_max") {
  RunConfig cfg = base_config(1024, 256, 10.0, 91);
  cfg.algorithm.t_max = 8;
  const SystemInstance inst = instance_of(cfg);

  const RunResult probe = run(cfg, inst);
  REQUIRE(probe.ok);
  REQUIRE(probe.outer.size() == 8);
  double v0 = probe.outer.front().v_ba_tilde;
  double vmin = v0;
  for (const OuterRecord& rec : probe.outer) vmin = std::min(vmin, rec.v_ba_tilde);
  REQUIRE(vmin < v0);

  cfg.algorithm.epsilon = std::sqrt(v0 * vmin);
  const RunResult res = run(cfg, inst);
  REQUIRE(res.ok);
  CHECK(res.outer.size() >= 1);
  CHECK(res.outer.size() < 8);
  // Every recorded row sits at or above the stop level; the breaking
  // iteration is dropped before recording.
  for (const OuterRecord& rec : res.outer) CHECK(rec.v_ba_tilde >= cfg.algorithm.epsilon);
}

TEST_CASE("an epsilon above the initial error variance yields an empty trace") {
  RunConfig cfg = base_config(512, 128, 4.0, 95);
  cfg.algorithm.epsilon = 1e9;
  const SystemInstance inst = instance_of(cfg);
  const RunResult res = run(cfg, inst);
  CHECK(res.ok);
  CHECK(res.outer.empty());
  CHECK(res.inner.empty());
  REQUIRE(res.x_hat.size() == 512);
  CHECK(res.x_hat.isZero(0.0));
}

TEST_CASE("repeat runs are bit identical and so are their CSV files") {
  RunConfig cfg = base_config(1024, 256, 10.0, 101);
  const SystemInstance inst = instance_of(cfg);

  const RunResult r1 = run(cfg, inst);
  const RunResult r2 = run(cfg, inst);
  REQUIRE(r1.ok);
  REQUIRE(r2.ok);
  REQUIRE(r1.outer.size() == r2.outer.size());
  for (std::size_t t = 0; t < r1.outer.size(); ++t) {
    CHECK(r1.outer[t].nmse == r2.outer[t].nmse);
    CHECK(r1.outer[t].v_ab_tilde == r2.outer[t].v_ab_tilde);
    CHECK(r1.outer[t].gamma_tilde == r2.outer[t].gamma_tilde);
  }
  CHECK((r1.x_hat - r2.x_hat).cwiseAbs().maxCoeff() == 0.0);

  const std::string p1 = "outer_det_1.csv", p2 = "outer_det_2.csv";
  write_outer_csv(r1, p1);
  write_outer_csv(r2, p2);
  const std::string c1 = slurp(p1), c2 = slurp(p2);
  CHECK(!c1.empty());
  CHECK(c1 == c2);
  CHECK(c1.rfind("# cgvamp-trace v1", 0) == 0);

  const std::string q1 = "inner_det_1.csv", q2 = "inner_det_2.csv";
  write_inner_csv(r1, q1);
  write_inner_csv(r2, q2);
  CHECK(slurp(q1) == slurp(q2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  std::remove(q1.c_str());
  std::remove(q2.c_str());
}

TEST_CASE("a denoiser with unit divergence fails the run but returns a usable result") {
  RunConfig cfg = base_config(512, 128, 4.0, 111);
  cfg.denoiser.lambda_mult = 0.0;  // zero threshold: identity denoiser, divergence 1
  const SystemInstance inst = instance_of(cfg);
  const RunResult res = run(cfg, inst);

  CHECK(!res.ok);
  CHECK(res.error_code == ErrorCode::degenerate);
  CHECK(!res.error.empty());
  // Failure hits in the first denoising step, before any row is recorded.
  CHECK(res.outer.empty());
  REQUIRE(res.x_hat.size() == 512);
  CHECK(res.x_hat.isZero(0.0));
}

TEST_CASE("config validation rejects out-of-range loop controls") {
  RunConfig cfg = base_config(256, 64, 2.0, 121);
  cfg.algorithm.t_max = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.algorithm.t_max = 4;
  cfg.algorithm.epsilon = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
