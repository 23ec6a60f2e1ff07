#include "cgvamp/cgvamp.h"

#include <cstring>
#include <string>

#include <json.hpp>

#include "cgvamp/core/errors.hpp"
#include "cgvamp/core/harness.hpp"
#include "cgvamp/core/outer_loop.hpp"

using namespace cgvamp;

namespace {

thread_local std::string g_last_error;

cgvamp_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_arg: return CGVAMP_ERR_INVALID_ARG;
    case ErrorCode::shape: return CGVAMP_ERR_SHAPE;
    case ErrorCode::parse: return CGVAMP_ERR_PARSE;
    case ErrorCode::numeric: return CGVAMP_ERR_NUMERIC;
    case ErrorCode::degenerate: return CGVAMP_ERR_DEGENERATE;
    case ErrorCode::io: return CGVAMP_ERR_IO;
    case ErrorCode::internal: return CGVAMP_ERR_INTERNAL;
  }
  return CGVAMP_ERR_INTERNAL;
}

cgvamp_status set_error(cgvamp_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Every entry point funnels through here so exceptions never cross the ABI.
template <typename Fn>
cgvamp_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CGVAMP_OK;
  } catch (const Error& e) {
    return set_error(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CGVAMP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CGVAMP_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(CGVAMP_ERR_INTERNAL, "unknown error");
  }
}

cgvamp_status require_arg(bool ok, const char* msg) {
  return ok ? CGVAMP_OK : set_error(CGVAMP_ERR_INVALID_ARG, msg);
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

} // namespace

struct cgvamp_operator {
  OperatorPtr op;
};

struct cgvamp_instance {
  SystemInstance inst;
};

struct cgvamp_config {
  RunConfig cfg;
};

struct cgvamp_result {
  RunResult res;
};

extern "C" {

const char* cgvamp_version(void) { return "1.0.0"; }

const char* cgvamp_status_string(cgvamp_status s) {
  switch (s) {
    case CGVAMP_OK: return "ok";
    case CGVAMP_ERR_INVALID_ARG: return "invalid argument";
    case CGVAMP_ERR_SHAPE: return "shape mismatch";
    case CGVAMP_ERR_PARSE: return "parse error";
    case CGVAMP_ERR_NUMERIC: return "numeric failure";
    case CGVAMP_ERR_DEGENERATE: return "degenerate scalar";
    case CGVAMP_ERR_IO: return "io failure";
    case CGVAMP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* cgvamp_last_error(void) { return g_last_error.c_str(); }

cgvamp_status cgvamp_operator_create(const char* spec_json, cgvamp_operator** out) {
  if (auto s = require_arg(spec_json && out, "operator_create: null argument")) return s;
  *out = nullptr;
  return guarded([&]() {
    auto spec = OperatorSpec::from_json(spec_json);
    *out = new cgvamp_operator{build_operator(spec)};
  });
}

void cgvamp_operator_destroy(cgvamp_operator* op) { delete op; }

cgvamp_status cgvamp_operator_rows(const cgvamp_operator* op, int64_t* m) {
  if (auto s = require_arg(op && m, "operator_rows: null argument")) return s;
  *m = op->op->rows();
  return CGVAMP_OK;
}

cgvamp_status cgvamp_operator_cols(const cgvamp_operator* op, int64_t* n) {
  if (auto s = require_arg(op && n, "operator_cols: null argument")) return s;
  *n = op->op->cols();
  return CGVAMP_OK;
}

cgvamp_status cgvamp_operator_apply(const cgvamp_operator* op, const double* x, size_t n,
                                    double* y, size_t m) {
  if (auto s = require_arg(op && x && y, "operator_apply: null argument")) return s;
  return guarded([&]() {
    require(static_cast<int64_t>(n) == op->op->cols() &&
                static_cast<int64_t>(m) == op->op->rows(),
            ErrorCode::shape, "operator_apply: buffer sizes do not match operator dims");
    Eigen::Map<const Vec> xin(x, static_cast<Eigen::Index>(n));
    Vec yout = op->op->apply(xin);
    std::memcpy(y, yout.data(), m * sizeof(double));
  });
}

cgvamp_status cgvamp_operator_apply_adjoint(const cgvamp_operator* op, const double* u,
                                            size_t m, double* x, size_t n) {
  if (auto s = require_arg(op && u && x, "operator_apply_adjoint: null argument")) return s;
  return guarded([&]() {
    require(static_cast<int64_t>(n) == op->op->cols() &&
                static_cast<int64_t>(m) == op->op->rows(),
            ErrorCode::shape,
            "operator_apply_adjoint: buffer sizes do not match operator dims");
    Eigen::Map<const Vec> uin(u, static_cast<Eigen::Index>(m));
    Vec xout = op->op->apply_adjoint(uin);
    std::memcpy(x, xout.data(), n * sizeof(double));
  });
}

cgvamp_status cgvamp_operator_spec_json(const cgvamp_operator* op, char** out) {
  if (auto s = require_arg(op && out, "operator_spec_json: null argument")) return s;
  return guarded([&]() { *out = dup_string(op->op->spec().to_json()); });
}

cgvamp_status cgvamp_instance_create(const cgvamp_operator* op, const char* instance_json,
                                     cgvamp_instance** out) {
  if (auto s = require_arg(op && instance_json && out, "instance_create: null argument"))
    return s;
  *out = nullptr;
  return guarded([&]() {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(instance_json);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::parse, std::string("instance: invalid JSON: ") + e.what());
    }
    SignalConfig signal;
    NoiseConfig noise;
    if (j.contains("signal")) {
      const auto& js = j.at("signal");
      signal.kind = js.value("kind", signal.kind);
      signal.sparsity = js.value("sparsity", signal.sparsity);
      signal.seed = js.value("seed", signal.seed);
    }
    if (j.contains("noise")) {
      const auto& jw = j.at("noise");
      noise.snr_db = jw.value("snr_db", noise.snr_db);
      noise.seed = jw.value("seed", noise.seed);
    }
    *out = new cgvamp_instance{SystemInstance::make(op->op, signal, noise)};
  });
}

void cgvamp_instance_destroy(cgvamp_instance* inst) { delete inst; }

cgvamp_status cgvamp_instance_dims(const cgvamp_instance* inst, int64_t* n, int64_t* m) {
  if (auto s = require_arg(inst && n && m, "instance_dims: null argument")) return s;
  *n = inst->inst.n();
  *m = inst->inst.m();
  return CGVAMP_OK;
}

cgvamp_status cgvamp_instance_noise_var(const cgvamp_instance* inst, double* v_w) {
  if (auto s = require_arg(inst && v_w, "instance_noise_var: null argument")) return s;
  *v_w = inst->inst.v_w;
  return CGVAMP_OK;
}

cgvamp_status cgvamp_instance_get_signal(const cgvamp_instance* inst, double* x, size_t n) {
  if (auto s = require_arg(inst && x, "instance_get_signal: null argument")) return s;
  return guarded([&]() {
    require(static_cast<int64_t>(n) == inst->inst.n(), ErrorCode::shape,
            "instance_get_signal: buffer size != n");
    std::memcpy(x, inst->inst.x.data(), n * sizeof(double));
  });
}

cgvamp_status cgvamp_instance_get_measurement(const cgvamp_instance* inst, double* y,
                                              size_t m) {
  if (auto s = require_arg(inst && y, "instance_get_measurement: null argument")) return s;
  return guarded([&]() {
    require(static_cast<int64_t>(m) == inst->inst.m(), ErrorCode::shape,
            "instance_get_measurement: buffer size != m");
    std::memcpy(y, inst->inst.y.data(), m * sizeof(double));
  });
}

cgvamp_status cgvamp_config_create(const char* json_text, cgvamp_config** out) {
  if (auto s = require_arg(json_text && out, "config_create: null argument")) return s;
  *out = nullptr;
  return guarded([&]() { *out = new cgvamp_config{RunConfig::from_json(json_text)}; });
}

cgvamp_status cgvamp_config_from_file(const char* path, cgvamp_config** out) {
  if (auto s = require_arg(path && out, "config_from_file: null argument")) return s;
  *out = nullptr;
  return guarded([&]() { *out = new cgvamp_config{RunConfig::from_file(path)}; });
}

void cgvamp_config_destroy(cgvamp_config* cfg) { delete cfg; }

cgvamp_status cgvamp_config_resolved_json(const cgvamp_config* cfg, char** out) {
  if (auto s = require_arg(cfg && out, "config_resolved_json: null argument")) return s;
  return guarded([&]() { *out = dup_string(cfg->cfg.to_json(2)); });
}

cgvamp_status cgvamp_config_hash(const cgvamp_config* cfg, char** out) {
  if (auto s = require_arg(cfg && out, "config_hash: null argument")) return s;
  return guarded([&]() { *out = dup_string(cfg->cfg.hash()); });
}

cgvamp_status cgvamp_run(const cgvamp_config* cfg, const cgvamp_instance* inst,
                         cgvamp_result** out) {
  if (auto s = require_arg(cfg && out, "run: null argument")) return s;
  *out = nullptr;
  return guarded([&]() {
    RunResult res;
    if (inst) {
      res = run(cfg->cfg, inst->inst);
    } else {
      auto op = build_operator(cfg->cfg.op);
      auto built = SystemInstance::make(op, cfg->cfg.signal, cfg->cfg.noise);
      res = run(cfg->cfg, built);
    }
    *out = new cgvamp_result{std::move(res)};
  });
}

void cgvamp_result_destroy(cgvamp_result* res) { delete res; }

cgvamp_status cgvamp_result_status(const cgvamp_result* res) {
  if (!res) return set_error(CGVAMP_ERR_INVALID_ARG, "result_status: null argument");
  return res->res.ok ? CGVAMP_OK : to_status(res->res.error_code);
}

const char* cgvamp_result_error_message(const cgvamp_result* res) {
  if (!res) return "";
  return res->res.error.c_str();
}

cgvamp_status cgvamp_result_outer_rows(const cgvamp_result* res, int64_t* rows) {
  if (auto s = require_arg(res && rows, "result_outer_rows: null argument")) return s;
  *rows = static_cast<int64_t>(res->res.outer.size());
  return CGVAMP_OK;
}

cgvamp_status cgvamp_result_inner_rows(const cgvamp_result* res, int64_t* rows) {
  if (auto s = require_arg(res && rows, "result_inner_rows: null argument")) return s;
  *rows = static_cast<int64_t>(res->res.inner.size());
  return CGVAMP_OK;
}

cgvamp_status cgvamp_result_outer_value(const cgvamp_result* res, int64_t row,
                                        const char* column, double* out) {
  if (auto s = require_arg(res && column && out, "result_outer_value: null argument"))
    return s;
  return guarded([&]() {
    require(row >= 0 && row < static_cast<int64_t>(res->res.outer.size()),
            ErrorCode::invalid_arg, "result_outer_value: row out of range");
    *out = outer_value(res->res.outer[static_cast<size_t>(row)], column);
  });
}

cgvamp_status cgvamp_result_inner_value(const cgvamp_result* res, int64_t row,
                                        const char* column, double* out) {
  if (auto s = require_arg(res && column && out, "result_inner_value: null argument"))
    return s;
  return guarded([&]() {
    require(row >= 0 && row < static_cast<int64_t>(res->res.inner.size()),
            ErrorCode::invalid_arg, "result_inner_value: row out of range");
    *out = inner_value(res->res.inner[static_cast<size_t>(row)], column);
  });
}

cgvamp_status cgvamp_result_write_csv(const cgvamp_result* res, const char* outer_path,
                                      const char* inner_path) {
  if (auto s = require_arg(res && outer_path, "result_write_csv: null argument")) return s;
  return guarded([&]() {
    write_outer_csv(res->res, outer_path);
    if (inner_path) write_inner_csv(res->res, inner_path);
  });
}

cgvamp_status cgvamp_sweep_run(const char* sweep_json, const char* out_dir,
                               char** manifest_json_out) {
  if (auto s = require_arg(sweep_json && out_dir, "sweep_run: null argument")) return s;
  return guarded([&]() {
    auto spec = SweepSpec::from_json(sweep_json);
    auto outcome = run_sweep(spec, out_dir);
    if (manifest_json_out) *manifest_json_out = dup_string(outcome.manifest_json);
  });
}

cgvamp_status cgvamp_plot_csv(const char* summary_csv_path, const char* kind,
                              const char* out_svg_path) {
  if (auto s = require_arg(summary_csv_path && kind && out_svg_path,
                           "plot_csv: null argument"))
    return s;
  return guarded([&]() { plot_summary(summary_csv_path, kind, out_svg_path); });
}

cgvamp_status cgvamp_audit(const char* config_json, char** report_json_out, int* passed) {
  if (auto s = require_arg(config_json, "audit: null argument")) return s;
  return guarded([&]() {
    auto cfg = RunConfig::from_json(config_json);
    auto report = audit_run(cfg);
    if (report_json_out) *report_json_out = dup_string(report.to_json());
    if (passed) *passed = report.passed ? 1 : 0;
  });
}

void cgvamp_string_free(char* s) { delete[] s; }

} // extern "C"
