#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cgvamp/core/errors.hpp"

namespace cgvamp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct OperatorSpec {
  std::string kind;      // "dense" | "fijl"
  std::int64_t n = 0;    // signal dimension (columns)
  std::int64_t m = 0;    // measurement dimension (rows)
  double kappa = 1.0;    // condition number of the singular spectrum
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static OperatorSpec from_json(const std::string& text);
};

// m geometric singular values s_k = s_0 * r^k with r = kappa^(-1/(m-1)),
// scaled so sum(s_k^2) = n, i.e. (1/n) Tr{A A^T} = 1.
Vec geometric_spectrum(std::int64_t n, std::int64_t m, double kappa);

class MeasurementOperator {
public:
  virtual ~MeasurementOperator() = default;

  std::int64_t rows() const { return spec_.m; }
  std::int64_t cols() const { return spec_.n; }
  double delta() const { return static_cast<double>(spec_.m) / static_cast<double>(spec_.n); }
  const OperatorSpec& spec() const { return spec_; }
  const Vec& spectrum() const { return spectrum_; }

  // Concurrent read-only application is safe; implementations keep no mutable
  // per-call state outside the stack.
  virtual Vec apply(const Vec& x) const = 0;
  virtual Vec apply_adjoint(const Vec& u) const = 0;

protected:
  explicit MeasurementOperator(OperatorSpec spec) : spec_(std::move(spec)) {}
  OperatorSpec spec_;
  Vec spectrum_;
};

using OperatorPtr = std::shared_ptr<const MeasurementOperator>;

// A = U diag(s) V^T with Haar-distributed factors (QR of Gaussian matrices
// with the R-diagonal sign fix). Keeps the factors for the exact-solve oracle.
class DenseOperator : public MeasurementOperator {
public:
  explicit DenseOperator(OperatorSpec spec);

  Vec apply(const Vec& x) const override;
  Vec apply_adjoint(const Vec& u) const override;

  const Mat& matrix() const { return a_; }
  const Mat& left_factor() const { return u_; }   // m x m
  const Mat& right_factor() const { return v_; }  // n x m, orthonormal columns

private:
  Mat a_, u_, v_;
};

// A = J S P H D: random signs, orthonormal DCT-II, random permutation,
// geometric spectrum, first-m subsampling. O(n log n) per application and
// A A^T = diag(s^2) by construction.
class FijlOperator : public MeasurementOperator {
public:
  explicit FijlOperator(OperatorSpec spec);
  ~FijlOperator() override;

  Vec apply(const Vec& x) const override;
  Vec apply_adjoint(const Vec& u) const override;

private:
  Vec signs_;
  std::vector<std::int64_t> perm_;
  void* plan_fwd_ = nullptr;  // fftw REDFT10, n points
  void* plan_inv_ = nullptr;  // fftw REDFT01, n points
};

OperatorPtr build_operator(const OperatorSpec& spec);

// v_w * u + v_ba * A A^T u with exactly one forward and one adjoint call.
Vec apply_w(const MeasurementOperator& op, const Vec& u, double v_w_tilde, double v_ba_tilde);

// Column-by-column materialization; diagnostic use at small sizes.
Mat materialize(const MeasurementOperator& op);

} // namespace cgvamp
