#pragma once

#include <cstdint>
#include <functional>

#include "cgvamp/core/operators.hpp"

namespace cgvamp {

// Componentwise denoiser g(r, v) with r the noisy input at variance v.
using DenoiserFn = std::function<Vec(const Vec& r, double v)>;

struct SoftThresholdConfig {
  double lambda_mult = 1.4;  // threshold = lambda_mult * sqrt(v)
};

Vec soft_threshold(const Vec& r, double v, double lambda_mult);

// Exact divergence of soft thresholding: (#{|r_k| > tau}) / n.
double soft_threshold_divergence(const Vec& r, double v, double lambda_mult);

struct McDivergenceConfig {
  int probes = 1;
  std::uint64_t seed = 0;
  // step = epsilon_scale * sqrt(mean power of r); falls back to epsilon_scale
  // itself when r is all zero.
  double epsilon_scale = 1e-3;
};

// Black-box divergence estimate with Rademacher probes:
// mean over probes of (1/(n eps)) <eta, g(r + eps eta, v) - g(r, v)>.
double mc_divergence(const DenoiserFn& denoiser, const Vec& r, double v,
                     const McDivergenceConfig& config);

// A denoiser paired with the divergence rule used for its Onsager term.
struct Denoiser {
  DenoiserFn apply;
  std::function<double(const Vec& r, double v)> divergence;
};

struct DenoiserConfig {
  std::string kind = "soft_threshold";
  double lambda_mult = 1.4;
  std::string divergence = "analytic";  // "analytic" | "mc"
  int probes = 1;
  std::uint64_t probe_seed = 0;
  double delay_ms = 0.0;  // artificial per-call cost for timing studies
};

// Builds the denoiser named by the config; the artificial delay applies to
// every call, probe evaluations included.
Denoiser make_denoiser(const DenoiserConfig& config);

struct BlockBResult {
  Vec mu_b;         // denoised estimate g(x_ab, v_ab)
  Vec x_ba;         // Onsager-corrected message (mu_b - gamma_b x_ab)/(1 - gamma_b)
  double gamma_b = 0.0;
};

// gamma_b >= 1 - 1e-6 leaves no Onsager correction to divide by and errors out.
BlockBResult block_b_update(const Vec& x_ab, double v_ab, const Denoiser& denoiser);

} // namespace cgvamp
