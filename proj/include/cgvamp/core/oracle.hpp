#pragma once

#include <cstdint>
#include <vector>

#include "cgvamp/core/operators.hpp"

namespace cgvamp {

struct SignalConfig {
  std::string kind = "bernoulli_gaussian";
  double sparsity = 0.1;
  std::uint64_t seed = 0;
};

struct NoiseConfig {
  double snr_db = 40.0;
  std::uint64_t seed = 0;
};

// Synthetic ground-truth problem y = A x + w. The noise variance realizes the
// requested SNR exactly on the drawn instance: v_w = ||A x||^2 / (m 10^(snr/10)).
struct SystemInstance {
  OperatorPtr op;
  Vec x, w, y;
  double v_w = 0.0;

  std::int64_t n() const { return op->cols(); }
  std::int64_t m() const { return op->rows(); }
  double delta() const { return op->delta(); }

  static SystemInstance make(OperatorPtr op, const SignalConfig& signal,
                             const NoiseConfig& noise);
};

// Ground-truth counterpart of the recursion-based gamma estimate,
// -(1/(n v_ba)) <q, A^T mu> with q = x_ba - x and v_ba the caller's
// normalizer. Estimator-vs-oracle audits pass the run's v_ba estimate so
// both sides share one normalizer and the comparison isolates the
// recursion (one shared sign convention; see README notes on the
// correction scalar).
double oracle_gamma(const Vec& q, const MeasurementOperator& op, const Vec& mu,
                    double v_ba);

// Direct solve of W mu = z through the stored SVD; dense operators only.
Vec exact_lmmse(const Vec& z, const DenseOperator& op, double v_w_tilde, double v_ba_tilde);

double true_v_ab(const Vec& x_ab, const Vec& x);
double true_v_ba(const Vec& x_ba, const Vec& x);

// Normalized correlations <h, q_tau> / (n sqrt(v_h v_q)) for every q in the
// history, newest last.
std::vector<double> correlation_audit(const Vec& h, const std::vector<Vec>& q_history);

double excess_kurtosis(const Vec& v);

} // namespace cgvamp
