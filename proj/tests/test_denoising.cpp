#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "cgvamp/core/denoising.hpp"
#include "cgvamp/core/rng.hpp"

using namespace cgvamp;

namespace {

Vec gauss_vec(std::int64_t n, double scale, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::signal);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(n);
  for (std::int64_t k = 0; k < n; ++k) v[k] = scale * gauss(rng);
  return v;
}

} // namespace

TEST_CASE("soft threshold moves magnitudes by tau and zeroes the rest") {
  Vec r(4);
  r << 3.0, -0.5, 1.0, -2.5;
  const Vec g = soft_threshold(r, 1.0, 1.0);  // tau = 1
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 0.0);  // |r| = tau sits exactly on the threshold
  CHECK(g[3] == -1.5);
}

TEST_CASE("zero variance makes the threshold vanish") {
  const Vec r = gauss_vec(64, 2.0, 1);
  CHECK(soft_threshold(r, 0.0, 1.4) == r);
  CHECK(soft_threshold_divergence(r, 0.0, 1.4) == 1.0);
}

TEST_CASE("divergence counts the surviving fraction") {
  Vec r(4);
  r << 3.0, -0.5, 1.0, -2.5;
  CHECK(soft_threshold_divergence(r, 1.0, 1.0) == 0.5);  // strict: |r| = tau is out
  CHECK(soft_threshold_divergence(r, 100.0, 1.0) == 0.0);
  CHECK(soft_threshold_divergence(r, 1e-8, 1.0) == 1.0);
}

TEST_CASE("soft threshold shrinks and is 1-Lipschitz") {
  const Vec a = gauss_vec(256, 1.5, 2);
  const Vec b = gauss_vec(256, 1.5, 3);
  const Vec ga = soft_threshold(a, 1.0, 1.4);
  const Vec gb = soft_threshold(b, 1.0, 1.4);
  for (int k = 0; k < 256; ++k) {
    CHECK(std::abs(ga[k]) <= std::abs(a[k]));
    CHECK(ga[k] * a[k] >= 0.0);
  }
  CHECK((ga - gb).norm() <= (a - b).norm());
}

TEST_CASE("probe estimate of an identity map's divergence is one") {
  const Vec r = gauss_vec(1024, 1.0, 4);
  const DenoiserFn identity = [](const Vec& x, double) { return x; };
  McDivergenceConfig cfg;
  cfg.seed = 5;
  const double div = mc_divergence(identity, r, 1.0, cfg);
  CHECK(div == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("probe estimate tracks the analytic divergence") {
  const Vec r = gauss_vec(16384, 1.5, 6);
  const double lambda_mult = 1.4;
  const double analytic = soft_threshold_divergence(r, 1.0, lambda_mult);
  const DenoiserFn g = [lambda_mult](const Vec& x, double v) {
    return soft_threshold(x, v, lambda_mult);
  };
  McDivergenceConfig cfg;
  cfg.seed = 7;
  const double mc = mc_divergence(g, r, 1.0, cfg);
  CHECK(std::abs(mc - analytic) <= 0.02);
}

TEST_CASE("more probes average toward the same value deterministically") {
  const Vec r = gauss_vec(4096, 1.0, 8);
  const DenoiserFn g = [](const Vec& x, double v) { return soft_threshold(x, v, 1.4); };
  McDivergenceConfig cfg;
  cfg.seed = 9;
  cfg.probes = 4;
  const double first = mc_divergence(g, r, 1.0, cfg);
  const double second = mc_divergence(g, r, 1.0, cfg);
  CHECK(first == second);  // same seed, same probes
  CHECK(std::abs(first - soft_threshold_divergence(r, 1.0, 1.4)) <= 0.03);
}

TEST_CASE("bundled probe divergence refreshes per call but reproduces across builds") {
  DenoiserConfig cfg;
  cfg.divergence = "mc";
  cfg.probe_seed = 10;
  Denoiser a = make_denoiser(cfg);
  Denoiser b = make_denoiser(cfg);
  // Soft threshold is piecewise linear, so probe signs only matter for
  // entries within the probe step of the threshold; park mass there so the
  // per-call probe refresh is observable in the estimate.
  const Vec g = gauss_vec(2048, 1.0, 11);
  Vec r(2048);
  for (Eigen::Index k = 0; k < r.size(); ++k)
    r[k] = (k % 2 ? 1.0 : -1.0) * 1.4 * (1.0 + 2e-3 * g[k]);

  const double a1 = a.divergence(r, 1.0);
  const double a2 = a.divergence(r, 1.0);
  CHECK(a1 != a2);  // fresh probes on the second call
  CHECK(b.divergence(r, 1.0) == a1);  // same seed, same call index
  CHECK(b.divergence(r, 1.0) == a2);
}

TEST_CASE("unknown denoiser settings are rejected") {
  DenoiserConfig bad_kind;
  bad_kind.kind = "wavelet";
  CHECK_THROWS_AS(make_denoiser(bad_kind), Error);
  DenoiserConfig bad_div;
  bad_div.divergence = "autodiff";
  CHECK_THROWS_AS(make_denoiser(bad_div), Error);
  DenoiserConfig bad_delay;
  bad_delay.delay_ms = -1.0;
  CHECK_THROWS_AS(make_denoiser(bad_delay), Error);
}

TEST_CASE("configured delay slows every apply call") {
  DenoiserConfig cfg;
  cfg.delay_ms = 30.0;
  Denoiser d = make_denoiser(cfg);
  const Vec r = gauss_vec(16, 1.0, 12);
  const auto t0 = std::chrono::steady_clock::now();
  d.apply(r, 1.0);
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0).count();
  CHECK(ms >= 25.0);
}

TEST_CASE("zero divergence passes the denoised mean straight through") {
  Denoiser d;
  d.apply = [](const Vec& x, double) { return Vec(0.5 * x); };
  d.divergence = [](const Vec&, double) { return 0.0; };
  const Vec x_ab = gauss_vec(64, 1.0, 13);
  const BlockBResult res = block_b_update(x_ab, 1.0, d);
  CHECK(res.gamma_b == 0.0);
  CHECK(res.x_ba == res.mu_b);
}

TEST_CASE("onsager correction matches its closed form") {
  DenoiserConfig cfg;
  Denoiser d = make_denoiser(cfg);
  const Vec x_ab = gauss_vec(512, 2.0, 14);
  const double v_ab = 1.3;
  const BlockBResult res = block_b_update(x_ab, v_ab, d);
  const double gamma = soft_threshold_divergence(x_ab, v_ab, cfg.lambda_mult);
  CHECK(res.gamma_b == gamma);
  const Vec expected = (soft_threshold(x_ab, v_ab, cfg.lambda_mult) - gamma * x_ab) /
                       (1.0 - gamma);
  CHECK((res.x_ba - expected).norm() <= 1e-14 * expected.norm());
}

TEST_CASE("an identity denoiser has no usable Onsager correction") {
  Denoiser d;
  d.apply = [](const Vec& x, double) { return x; };
  d.divergence = [](const Vec&, double) { return 1.0; };
  const Vec x_ab = gauss_vec(32, 1.0, 15);
  CHECK_THROWS_AS(block_b_update(x_ab, 1.0, d), Error);
  try {
    block_b_update(x_ab, 1.0, d);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate);
  }
}

TEST_CASE("probe and analytic Onsager terms agree at scale") {
  const Vec x_ab = gauss_vec(16384, 1.8, 16);
  DenoiserConfig analytic;
  DenoiserConfig probed;
  probed.divergence = "mc";
  probed.probe_seed = 17;
  const BlockBResult a = block_b_update(x_ab, 1.0, make_denoiser(analytic));
  const BlockBResult b = block_b_update(x_ab, 1.0, make_denoiser(probed));
  CHECK(std::abs(a.gamma_b - b.gamma_b) <= 0.02);
  CHECK((a.x_ba - b.x_ba).norm() <= 0.05 * a.x_ba.norm());
}
