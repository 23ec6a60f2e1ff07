#include "cgvamp/core/denoising.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "cgvamp/core/rng.hpp"

namespace cgvamp {

Vec soft_threshold(const Vec& r, double v, double lambda_mult) {
  require(std::isfinite(v) && v >= 0.0, ErrorCode::invalid_arg,
          "soft_threshold: variance must be finite and non-negative");
  require(lambda_mult >= 0.0, ErrorCode::invalid_arg,
          "soft_threshold: lambda_mult must be non-negative");
  require(r.allFinite(), ErrorCode::numeric, "soft_threshold: non-finite input");
  const double tau = lambda_mult * std::sqrt(v);
  Vec out(r.size());
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const double mag = std::abs(r[k]) - tau;
    out[k] = mag > 0.0 ? (r[k] > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

double soft_threshold_divergence(const Vec& r, double v, double lambda_mult) {
  require(std::isfinite(v) && v >= 0.0, ErrorCode::invalid_arg,
          "soft_threshold_divergence: variance must be finite and non-negative");
  require(r.allFinite(), ErrorCode::numeric, "soft_threshold_divergence: non-finite input");
  require(r.size() > 0, ErrorCode::shape, "soft_threshold_divergence: empty input");
  const double tau = lambda_mult * std::sqrt(v);
  std::int64_t active = 0;
  for (Eigen::Index k = 0; k < r.size(); ++k)
    if (std::abs(r[k]) > tau) ++active;
  return static_cast<double>(active) / static_cast<double>(r.size());
}

double mc_divergence(const DenoiserFn& denoiser, const Vec& r, double v,
                     const McDivergenceConfig& config) {
  require(config.probes >= 1, ErrorCode::invalid_arg, "mc_divergence: probes must be >= 1");
  require(config.epsilon_scale > 0.0, ErrorCode::invalid_arg,
          "mc_divergence: epsilon_scale must be positive");
  require(r.size() > 0, ErrorCode::shape, "mc_divergence: empty input");
  require(r.allFinite(), ErrorCode::numeric, "mc_divergence: non-finite input");

  const double n = static_cast<double>(r.size());
  const double power = r.squaredNorm() / n;
  const double eps = power > 0.0 ? config.epsilon_scale * std::sqrt(power) : config.epsilon_scale;

  const Vec base = denoiser(r, v);
  require(base.size() == r.size(), ErrorCode::shape, "mc_divergence: denoiser changed size");

  auto rng = make_rng(config.seed, Stream::probes);
  double acc = 0.0;
  Vec eta(r.size());
  for (int p = 0; p < config.probes; ++p) {
    for (Eigen::Index k = 0; k < r.size(); ++k) eta[k] = (rng() & 1u) ? 1.0 : -1.0;
    const Vec perturbed = denoiser(r + eps * eta, v);
    acc += eta.dot(perturbed - base) / (n * eps);
  }
  return acc / static_cast<double>(config.probes);
}

Denoiser make_denoiser(const DenoiserConfig& config) {
  require(config.kind == "soft_threshold", ErrorCode::invalid_arg,
          "denoiser kind must be 'soft_threshold', got '" + config.kind + "'");
  require(config.divergence == "analytic" || config.divergence == "mc", ErrorCode::invalid_arg,
          "denoiser divergence must be 'analytic' or 'mc'");
  require(config.delay_ms >= 0.0, ErrorCode::invalid_arg, "denoiser delay must be >= 0");

  const double lambda_mult = config.lambda_mult;
  const double delay_ms = config.delay_ms;
  DenoiserFn apply = [lambda_mult, delay_ms](const Vec& r, double v) {
    if (delay_ms > 0.0)
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
    return soft_threshold(r, v, lambda_mult);
  };

  Denoiser d;
  if (config.divergence == "analytic") {
    d.divergence = [lambda_mult](const Vec& r, double v) {
      return soft_threshold_divergence(r, v, lambda_mult);
    };
  } else {
    McDivergenceConfig mc;
    mc.probes = config.probes;
    mc.seed = config.probe_seed;
    // Fresh probe sub-stream per call, deterministic given probe_seed.
    auto counter = std::make_shared<std::uint64_t>(0);
    d.divergence = [apply, mc, counter](const Vec& r, double v) {
      McDivergenceConfig call_cfg = mc;
      call_cfg.seed = derive_seed(mc.seed, Stream::probes, (*counter)++);
      return mc_divergence(apply, r, v, call_cfg);
    };
  }
  d.apply = std::move(apply);
  return d;
}

BlockBResult block_b_update(const Vec& x_ab, double v_ab, const Denoiser& denoiser) {
  require(x_ab.allFinite(), ErrorCode::numeric, "block_b_update: non-finite input");
  require(std::isfinite(v_ab) && v_ab >= 0.0, ErrorCode::invalid_arg,
          "block_b_update: v_ab must be finite and non-negative");

  BlockBResult res;
  res.mu_b = denoiser.apply(x_ab, v_ab);
  require(res.mu_b.size() == x_ab.size(), ErrorCode::shape,
          "block_b_update: denoiser changed size");
  res.gamma_b = denoiser.divergence(x_ab, v_ab);
  require(std::isfinite(res.gamma_b), ErrorCode::numeric, "block_b_update: non-finite gamma_b");
  require(res.gamma_b < 1.0 - 1e-6, ErrorCode::degenerate,
          "block_b_update: denoiser divergence too close to 1; Onsager correction degenerate");
  res.x_ba = (res.mu_b - res.gamma_b * x_ab) / (1.0 - res.gamma_b);
  return res;
}

} // namespace cgvamp
