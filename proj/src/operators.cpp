#include "cgvamp/core/operators.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <json.hpp>

#include "cgvamp/core/rng.hpp"

namespace cgvamp {

namespace {

// fftw plan creation/destruction is not thread-safe; execution is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void check_finite(const Vec& v, const char* what) {
  require(v.allFinite(), ErrorCode::numeric, std::string(what) + ": non-finite input");
}

} // namespace

void OperatorSpec::validate() const {
  require(kind == "dense" || kind == "fijl", ErrorCode::invalid_arg,
          "operator kind must be 'dense' or 'fijl', got '" + kind + "'");
  require(n >= 1 && m >= 1, ErrorCode::shape, "operator dims must be positive");
  require(m <= n, ErrorCode::shape, "operator requires m <= n");
  require(std::isfinite(kappa) && kappa >= 1.0, ErrorCode::invalid_arg,
          "operator kappa must be finite and >= 1");
}

std::string OperatorSpec::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["n"] = n;
  j["m"] = m;
  j["kappa"] = kappa;
  j["seed"] = seed;
  return j.dump();
}

OperatorSpec OperatorSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("operator spec: ") + e.what());
  }
  OperatorSpec spec;
  try {
    spec.kind = j.at("kind").get<std::string>();
    spec.n = j.at("n").get<std::int64_t>();
    spec.m = j.at("m").get<std::int64_t>();
    spec.kappa = j.value("kappa", 1.0);
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse, std::string("operator spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

Vec geometric_spectrum(std::int64_t n, std::int64_t m, double kappa) {
  require(n >= m && m >= 1, ErrorCode::shape, "spectrum requires n >= m >= 1");
  require(kappa >= 1.0, ErrorCode::invalid_arg, "spectrum requires kappa >= 1");
  Vec s(m);
  if (m == 1) {
    s[0] = std::sqrt(static_cast<double>(n));
    return s;
  }
  const double ratio = std::pow(kappa, -1.0 / static_cast<double>(m - 1));
  double sum_sq = 0.0;
  for (std::int64_t k = 0; k < m; ++k) {
    s[k] = std::pow(ratio, static_cast<double>(k));
    sum_sq += s[k] * s[k];
  }
  s *= std::sqrt(static_cast<double>(n) / sum_sq);
  return s;
}

// ---- dense ----------------------------------------------------------------

namespace {

// QR-based Haar sampling; multiplying each column by the sign of the matching
// R diagonal makes the draw unambiguous.
Mat haar_columns(std::int64_t rows, std::int64_t cols, std::mt19937_64& rng) {
  Mat g(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::int64_t j = 0; j < cols; ++j)
    for (std::int64_t i = 0; i < rows; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(rows, cols);
  Mat r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (std::int64_t j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

} // namespace

DenseOperator::DenseOperator(OperatorSpec spec) : MeasurementOperator(std::move(spec)) {
  spec_.validate();
  spectrum_ = geometric_spectrum(spec_.n, spec_.m, spec_.kappa);
  auto rng = make_rng(spec_.seed, Stream::operator_gauss);
  u_ = haar_columns(spec_.m, spec_.m, rng);
  v_ = haar_columns(spec_.n, spec_.m, rng);
  a_ = u_ * spectrum_.asDiagonal() * v_.transpose();
}

Vec DenseOperator::apply(const Vec& x) const {
  require(x.size() == cols(), ErrorCode::shape, "dense apply: size mismatch");
  check_finite(x, "dense apply");
  return a_ * x;
}

Vec DenseOperator::apply_adjoint(const Vec& u) const {
  require(u.size() == rows(), ErrorCode::shape, "dense apply_adjoint: size mismatch");
  check_finite(u, "dense apply_adjoint");
  return a_.transpose() * u;
}

// ---- fijl ------------------------------------------------------------------

FijlOperator::FijlOperator(OperatorSpec spec) : MeasurementOperator(std::move(spec)) {
  spec_.validate();
  const std::int64_t n = spec_.n;
  spectrum_ = geometric_spectrum(n, spec_.m, spec_.kappa);

  signs_ = Vec(n);
  {
    auto rng = make_rng(spec_.seed, Stream::operator_signs);
    for (std::int64_t i = 0; i < n; ++i) signs_[i] = (rng() & 1u) ? 1.0 : -1.0;
  }
  perm_.resize(static_cast<size_t>(n));
  {
    auto rng = make_rng(spec_.seed, Stream::operator_perm);
    for (std::int64_t i = 0; i < n; ++i) perm_[static_cast<size_t>(i)] = i;
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(bounded_rand(rng, static_cast<std::uint64_t>(i + 1)));
      std::swap(perm_[static_cast<size_t>(i)], perm_[static_cast<size_t>(j)]);
    }
  }

  // FFTW_UNALIGNED lets the plans run on arbitrary caller buffers, which keeps
  // concurrent application allocation-free of fftw state.
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  Vec scratch_in(n), scratch_out(n);
  plan_fwd_ = fftw_plan_r2r_1d(static_cast<int>(n), scratch_in.data(), scratch_out.data(),
                               FFTW_REDFT10, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plan_inv_ = fftw_plan_r2r_1d(static_cast<int>(n), scratch_in.data(), scratch_out.data(),
                               FFTW_REDFT01, FFTW_ESTIMATE | FFTW_UNALIGNED);
  require(plan_fwd_ != nullptr && plan_inv_ != nullptr, ErrorCode::internal,
          "fftw plan creation failed");
}

FijlOperator::~FijlOperator() {
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
  if (plan_inv_) fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

Vec FijlOperator::apply(const Vec& x) const {
  const std::int64_t n = cols(), m = rows();
  require(x.size() == n, ErrorCode::shape, "fijl apply: size mismatch");
  check_finite(x, "fijl apply");

  Vec t = signs_.cwiseProduct(x);
  Vec c(n);
  fftw_execute_r2r(static_cast<fftw_plan>(plan_fwd_), t.data(), c.data());
  // REDFT10 -> orthonormal DCT-II scaling.
  const double a0 = 0.5 / std::sqrt(static_cast<double>(n));
  const double ak = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  c[0] *= a0;
  c.tail(n - 1) *= ak;

  Vec y(m);
  for (std::int64_t k = 0; k < m; ++k) y[k] = spectrum_[k] * c[perm_[static_cast<size_t>(k)]];
  return y;
}

Vec FijlOperator::apply_adjoint(const Vec& u) const {
  const std::int64_t n = cols(), m = rows();
  require(u.size() == m, ErrorCode::shape, "fijl apply_adjoint: size mismatch");
  check_finite(u, "fijl apply_adjoint");

  Vec w = Vec::Zero(n);
  for (std::int64_t k = 0; k < m; ++k) w[perm_[static_cast<size_t>(k)]] = spectrum_[k] * u[k];
  // Orthonormal DCT-III via REDFT01.
  w[0] /= std::sqrt(static_cast<double>(n));
  w.tail(n - 1) /= std::sqrt(2.0 * static_cast<double>(n));
  Vec t(n);
  fftw_execute_r2r(static_cast<fftw_plan>(plan_inv_), w.data(), t.data());
  return signs_.cwiseProduct(t);
}

// ---- shared helpers --------------------------------------------------------

OperatorPtr build_operator(const OperatorSpec& spec) {
  spec.validate();
  if (spec.kind == "dense") return std::make_shared<DenseOperator>(spec);
  return std::make_shared<FijlOperator>(spec);
}

Vec apply_w(const MeasurementOperator& op, const Vec& u, double v_w_tilde, double v_ba_tilde) {
  require(u.size() == op.rows(), ErrorCode::shape, "apply_w: size mismatch");
  require(std::isfinite(v_w_tilde) && std::isfinite(v_ba_tilde) && v_w_tilde >= 0.0 &&
              v_ba_tilde >= 0.0,
          ErrorCode::invalid_arg, "apply_w: variances must be finite and non-negative");
  check_finite(u, "apply_w");
  if (v_ba_tilde == 0.0) return v_w_tilde * u;
  return v_w_tilde * u + v_ba_tilde * op.apply(op.apply_adjoint(u));
}

Mat materialize(const MeasurementOperator& op) {
  Mat a(op.rows(), op.cols());
  Vec e = Vec::Zero(op.cols());
  for (std::int64_t j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    a.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return a;
}

} // namespace cgvamp
