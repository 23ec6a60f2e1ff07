#include "cgvamp/core/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

namespace cgvamp {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void parse_fail(const std::string& what) { fail(ErrorCode::parse, "config: " + what); }

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
}

// delta_threshold = +inf disables the improvement criterion; JSON carries it
// as the string "inf".
double number_or_inf(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
    parse_fail(std::string(key) + ": unrecognized value '" + s + "'");
  }
  if (!v.is_number()) parse_fail(std::string(key) + ": expected number or \"inf\"");
  return v.get<double>();
}

ojson inf_aware(double v) {
  if (std::isinf(v)) return ojson("inf");
  return ojson(v);
}

} // namespace

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

void RunConfig::validate() const {
  op.validate();
  require(signal.kind == "bernoulli_gaussian", ErrorCode::invalid_arg,
          "config: unknown signal kind '" + signal.kind + "'");
  require(signal.sparsity > 0.0 && signal.sparsity <= 1.0, ErrorCode::invalid_arg,
          "config: signal sparsity must be in (0, 1]");
  require(std::isfinite(noise.snr_db), ErrorCode::invalid_arg, "config: snr_db must be finite");
  require(denoiser.kind == "soft_threshold", ErrorCode::invalid_arg,
          "config: unknown denoiser kind '" + denoiser.kind + "'");
  require(denoiser.divergence == "analytic" || denoiser.divergence == "mc",
          ErrorCode::invalid_arg, "config: denoiser divergence must be 'analytic' or 'mc'");
  require(denoiser.probes >= 1, ErrorCode::invalid_arg, "config: probes must be >= 1");
  require(denoiser.delay_ms >= 0.0, ErrorCode::invalid_arg, "config: delay_ms must be >= 0");
  require(algorithm.variant == "cgvamp" || algorithm.variant == "ws_practical" ||
              algorithm.variant == "ws_oracle",
          ErrorCode::invalid_arg, "config: unknown variant '" + algorithm.variant + "'");
  require(algorithm.t_max >= 1, ErrorCode::invalid_arg, "config: t_max must be >= 1");
  require(algorithm.epsilon >= 0.0, ErrorCode::invalid_arg, "config: epsilon must be >= 0");
  if (algorithm.inner.mode == InnerPolicy::Mode::adaptive) {
    require(algorithm.inner.acg.c > 0.0, ErrorCode::invalid_arg, "config: acg c must be > 0");
    require(algorithm.inner.acg.i_max >= 1, ErrorCode::invalid_arg,
            "config: acg i_max must be >= 1");
  } else {
    require(algorithm.inner.fixed_iterations >= 1, ErrorCode::invalid_arg,
            "config: fixed inner iterations must be >= 1");
  }
  if (algorithm.v_w_override)
    require(*algorithm.v_w_override >= 0.0 && std::isfinite(*algorithm.v_w_override),
            ErrorCode::invalid_arg, "config: v_w_override must be finite and >= 0");
}

RunConfig RunConfig::from_json(const std::string& text) {
  const json j = parse_json(text);
  RunConfig cfg;
  try {
    if (!j.contains("operator")) parse_fail("missing 'operator' section");
    const auto& jop = j.at("operator");
    cfg.op.kind = jop.value("kind", std::string("fijl"));
    cfg.op.n = jop.at("n").get<std::int64_t>();
    if (jop.contains("m")) {
      cfg.op.m = jop.at("m").get<std::int64_t>();
    } else if (jop.contains("delta")) {
      cfg.op.m = static_cast<std::int64_t>(
          std::llround(jop.at("delta").get<double>() * static_cast<double>(cfg.op.n)));
    } else {
      parse_fail("operator needs 'm' or 'delta'");
    }
    cfg.op.kappa = jop.value("kappa", 1.0);
    cfg.op.seed = jop.value("seed", std::uint64_t{0});

    if (j.contains("signal")) {
      const auto& js = j.at("signal");
      cfg.signal.kind = js.value("kind", cfg.signal.kind);
      cfg.signal.sparsity = js.value("sparsity", cfg.signal.sparsity);
      cfg.signal.seed = js.value("seed", std::uint64_t{0});
    }
    if (j.contains("noise")) {
      const auto& jn = j.at("noise");
      cfg.noise.snr_db = jn.value("snr_db", cfg.noise.snr_db);
      cfg.noise.seed = jn.value("seed", std::uint64_t{0});
    }
    if (j.contains("denoiser")) {
      const auto& jd = j.at("denoiser");
      cfg.denoiser.kind = jd.value("kind", cfg.denoiser.kind);
      cfg.denoiser.lambda_mult = jd.value("lambda_mult", cfg.denoiser.lambda_mult);
      cfg.denoiser.divergence = jd.value("divergence", cfg.denoiser.divergence);
      cfg.denoiser.probes = jd.value("probes", cfg.denoiser.probes);
      cfg.denoiser.probe_seed = jd.value("probe_seed", std::uint64_t{0});
      cfg.denoiser.delay_ms = jd.value("delay_ms", 0.0);
    }
    if (j.contains("algorithm")) {
      const auto& ja = j.at("algorithm");
      cfg.algorithm.variant = ja.value("variant", cfg.algorithm.variant);
      cfg.algorithm.t_max = ja.value("t_max", cfg.algorithm.t_max);
      cfg.algorithm.epsilon = ja.value("epsilon", cfg.algorithm.epsilon);
      if (ja.contains("v_w_override") && !ja.at("v_w_override").is_null())
        cfg.algorithm.v_w_override = ja.at("v_w_override").get<double>();
      if (ja.contains("inner")) {
        const auto& ji = ja.at("inner");
        const auto policy = ji.value("policy", std::string("acg"));
        if (policy == "acg") {
          cfg.algorithm.inner.mode = InnerPolicy::Mode::adaptive;
          cfg.algorithm.inner.acg.c = ji.value("c", 0.9);
          cfg.algorithm.inner.acg.delta_threshold =
              number_or_inf(ji, "delta_threshold", 0.015);
          cfg.algorithm.inner.acg.i_max = ji.value("i_max", 100);
        } else if (policy == "fixed") {
          cfg.algorithm.inner.mode = InnerPolicy::Mode::fixed;
          cfg.algorithm.inner.fixed_iterations = ji.value("iterations", 1);
        } else {
          parse_fail("inner policy must be 'acg' or 'fixed', got '" + policy + "'");
        }
      }
    }
    if (j.contains("trace")) {
      const auto& jt = j.at("trace");
      cfg.trace.oracle = jt.value("oracle", false);
      cfg.trace.include_timings = jt.value("include_timings", true);
    }
  } catch (const json::exception& e) {
    parse_fail(e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunConfig::to_json(int indent) const {
  ojson j;
  j["operator"] = {{"kind", op.kind}, {"n", op.n}, {"m", op.m}, {"kappa", op.kappa},
                   {"seed", op.seed}};
  j["signal"] = {{"kind", signal.kind}, {"sparsity", signal.sparsity}, {"seed", signal.seed}};
  j["noise"] = {{"snr_db", noise.snr_db}, {"seed", noise.seed}};
  j["denoiser"] = {{"kind", denoiser.kind},
                   {"lambda_mult", denoiser.lambda_mult},
                   {"divergence", denoiser.divergence},
                   {"probes", denoiser.probes},
                   {"probe_seed", denoiser.probe_seed},
                   {"delay_ms", denoiser.delay_ms}};
  ojson ji;
  if (algorithm.inner.mode == InnerPolicy::Mode::adaptive) {
    ji = {{"policy", "acg"},
          {"c", algorithm.inner.acg.c},
          {"delta_threshold", inf_aware(algorithm.inner.acg.delta_threshold)},
          {"i_max", algorithm.inner.acg.i_max}};
  } else {
    ji = {{"policy", "fixed"}, {"iterations", algorithm.inner.fixed_iterations}};
  }
  j["algorithm"] = {{"variant", algorithm.variant},
                    {"inner", ji},
                    {"t_max", algorithm.t_max},
                    {"epsilon", algorithm.epsilon},
                    {"v_w_override",
                     algorithm.v_w_override ? ojson(*algorithm.v_w_override) : ojson(nullptr)}};
  j["trace"] = {{"oracle", trace.oracle}, {"include_timings", trace.include_timings}};
  return j.dump(indent);
}

std::string RunConfig::hash() const {
  RunConfig numeric = *this;
  numeric.trace = TraceConfig{};  // output options do not affect the numbers
  return fnv1a_hex(numeric.to_json());
}

} // namespace cgvamp
