#include "cgvamp/core/oracle.hpp"

#include <cmath>

#include "cgvamp/core/rng.hpp"

namespace cgvamp {

SystemInstance SystemInstance::make(OperatorPtr op, const SignalConfig& signal,
                                    const NoiseConfig& noise) {
  require(op != nullptr, ErrorCode::invalid_arg, "instance: null operator");
  require(signal.kind == "bernoulli_gaussian", ErrorCode::invalid_arg,
          "signal kind must be 'bernoulli_gaussian', got '" + signal.kind + "'");
  require(signal.sparsity > 0.0 && signal.sparsity <= 1.0, ErrorCode::invalid_arg,
          "signal sparsity must be in (0, 1]");
  require(std::isfinite(noise.snr_db), ErrorCode::invalid_arg, "noise snr_db must be finite");

  SystemInstance inst;
  inst.op = std::move(op);
  const std::int64_t n = inst.n(), m = inst.m();

  inst.x = Vec::Zero(n);
  {
    auto rng = make_rng(signal.seed, Stream::signal);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::int64_t k = 0; k < n; ++k) {
      const double u = unif(rng);
      const double g = normal(rng);
      if (u < signal.sparsity) inst.x[k] = g;
    }
  }

  const Vec ax = inst.op->apply(inst.x);
  const double signal_power = ax.squaredNorm() / static_cast<double>(m);
  require(signal_power > 0.0, ErrorCode::degenerate,
          "instance: drawn signal maps to zero measurement; cannot realize an SNR");
  inst.v_w = signal_power / std::pow(10.0, noise.snr_db / 10.0);

  inst.w = Vec(m);
  {
    auto rng = make_rng(noise.seed, Stream::noise);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(inst.v_w);
    for (std::int64_t k = 0; k < m; ++k) inst.w[k] = sd * normal(rng);
  }
  inst.y = ax + inst.w;
  return inst;
}

double oracle_gamma(const Vec& q, const MeasurementOperator& op, const Vec& mu,
                    double v_ba) {
  require(q.size() == op.cols() && mu.size() == op.rows(), ErrorCode::shape,
          "oracle_gamma: size mismatch");
  require(v_ba > 0.0, ErrorCode::invalid_arg, "oracle_gamma: v_ba must be positive");
  // <q, A^T mu> = <A q, mu>; one forward application.
  const double qam = op.apply(q).dot(mu);
  return -qam / (static_cast<double>(op.cols()) * v_ba);
}

Vec exact_lmmse(const Vec& z, const DenseOperator& op, double v_w_tilde, double v_ba_tilde) {
  require(z.size() == op.rows(), ErrorCode::shape, "exact_lmmse: size mismatch");
  require(op.rows() <= 512, ErrorCode::invalid_arg,
          "exact_lmmse: dense solve limited to m <= 512");
  require(v_w_tilde > 0.0 || v_ba_tilde > 0.0, ErrorCode::invalid_arg,
          "exact_lmmse: W is identically zero");
  // W = U diag(v_w + v_ba s^2) U^T.
  const Vec& s = op.spectrum();
  Vec inv_eigs(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    const double e = v_w_tilde + v_ba_tilde * s[k] * s[k];
    require(e > 0.0, ErrorCode::numeric, "exact_lmmse: singular W");
    inv_eigs[k] = 1.0 / e;
  }
  const Mat& u = op.left_factor();
  return u * inv_eigs.asDiagonal() * (u.transpose() * z);
}

double true_v_ab(const Vec& x_ab, const Vec& x) {
  require(x_ab.size() == x.size(), ErrorCode::shape, "true_v_ab: size mismatch");
  return (x_ab - x).squaredNorm() / static_cast<double>(x.size());
}

double true_v_ba(const Vec& x_ba, const Vec& x) {
  require(x_ba.size() == x.size(), ErrorCode::shape, "true_v_ba: size mismatch");
  return (x_ba - x).squaredNorm() / static_cast<double>(x.size());
}

std::vector<double> correlation_audit(const Vec& h, const std::vector<Vec>& q_history) {
  std::vector<double> out;
  out.reserve(q_history.size());
  const double hn = h.norm();
  for (const Vec& q : q_history) {
    require(q.size() == h.size(), ErrorCode::shape, "correlation_audit: size mismatch");
    const double qn = q.norm();
    out.push_back(hn > 0.0 && qn > 0.0 ? h.dot(q) / (hn * qn) : 0.0);
  }
  return out;
}

double excess_kurtosis(const Vec& v) {
  require(v.size() > 0, ErrorCode::shape, "excess_kurtosis: empty input");
  const double n = static_cast<double>(v.size());
  const double mean = v.mean();
  double m2 = 0.0, m4 = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double d = v[k] - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  require(m2 > 0.0, ErrorCode::numeric, "excess_kurtosis: zero variance");
  return m4 / (m2 * m2) - 3.0;
}

} // namespace cgvamp
