#pragma once

#include <optional>
#include <string>

#include "cgvamp/core/cg.hpp"
#include "cgvamp/core/denoising.hpp"
#include "cgvamp/core/oracle.hpp"

namespace cgvamp {

struct InnerPolicy {
  enum class Mode { adaptive, fixed };
  Mode mode = Mode::adaptive;
  AcgConfig acg;             // adaptive mode
  int fixed_iterations = 1;  // fixed mode
};

struct AlgorithmConfig {
  std::string variant = "cgvamp";  // "cgvamp" | "ws_practical" | "ws_oracle"
  InnerPolicy inner;
  int t_max = 10;
  double epsilon = 0.0;  // stop once the estimated v_ba falls below this
  std::optional<double> v_w_override;
};

struct TraceConfig {
  bool oracle = false;
  bool include_timings = true;
};

// One solver run, fully specified. JSON round-trips through from_json/to_json;
// to_json emits every field in canonical order with defaults resolved.
struct RunConfig {
  OperatorSpec op;
  SignalConfig signal;
  NoiseConfig noise;
  DenoiserConfig denoiser;
  AlgorithmConfig algorithm;
  TraceConfig trace;

  void validate() const;
  std::string to_json(int indent = -1) const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);

  // FNV-1a over the canonical serialization of everything that affects the
  // numbers (trace/output options excluded). Fixed-width hex.
  std::string hash() const;
};

std::string fnv1a_hex(const std::string& data);

} // namespace cgvamp
