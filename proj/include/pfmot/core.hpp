#pragma once

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfmot
{

inline constexpr int kStateDim = 6;

/// Position (m) and velocity (m/s): [p1 p2 p3 v1 v2 v3].
using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using Covariance = Eigen::Matrix<double, kStateDim, kStateDim>;
using Position = Eigen::Vector3d;

inline Position position_of(StateVector const& x) { return x.head<3>(); }

enum class ErrorKind
{
  NonPositiveDefinite,
  StillSingular,
  SingularInnovation,
  NonFiniteParticle,
  NonInvertibleStep,
  DegenerateWeights,
  DegenerateGeometry,
};

std::string to_string(ErrorKind kind);

/// Numerical failure inside one of the estimation primitives.
class NumericError : public std::runtime_error
{
public:
  NumericError(ErrorKind kind, std::string const& what)
    : std::runtime_error(to_string(kind) + ": " + what), _kind(kind)
  {
  }
  [[nodiscard]] ErrorKind kind() const { return _kind; }

private:
  ErrorKind _kind;
};

struct GaussianKernel
{
  StateVector mean = StateVector::Zero();
  Covariance cov = Covariance::Identity();
};

/// Equally weighted Gaussian mixture; kernel weights are 1/N_k and never stored.
struct GmmBelief
{
  std::vector<GaussianKernel> kernels;

  [[nodiscard]] std::size_t size() const { return kernels.size(); }
};

struct PotentialObject
{
  std::int64_t label = 0;
  GmmBelief belief;
  double existence = 0.0;
  int birth_time = 0;
  int birth_sensor = 0;
};

struct Estimate
{
  std::int64_t label = 0;
  StateVector state = StateVector::Zero();
  double existence = 0.0;
};

// Jitter used before Cholesky factorizations: relative to trace(P)/dim with an absolute floor.
inline constexpr double kRelativeJitter = 1e-9;
inline constexpr double kAbsoluteJitterFloor = 1e-12;

template <int Dim>
double default_jitter(Eigen::Matrix<double, Dim, Dim> const& cov)
{
  double const scale = std::abs(cov.trace()) / static_cast<double>(cov.rows());
  return std::max(kRelativeJitter * scale, kAbsoluteJitterFloor);
}

/// Symmetrize, add jitter on the diagonal and verify positive definiteness.
Covariance spd_regularize(Covariance const& cov, double jitter);
Covariance spd_regularize(Covariance const& cov);

/// Multivariate normal density with a cached Cholesky factor.
/// Falls back to the default jitter when the plain factorization fails.
template <int Dim>
class MvnDensity
{
public:
  using Vector = Eigen::Matrix<double, Dim, 1>;
  using Matrix = Eigen::Matrix<double, Dim, Dim>;

  MvnDensity(Vector const& mean, Matrix const& cov) : _mean(mean)
  {
    Matrix sym = 0.5 * (cov + cov.transpose());
    _llt.compute(sym);
    if (_llt.info() != Eigen::Success || !(_llt.matrixLLT().diagonal().array() > 0.0).all())
    {
      sym.diagonal().array() += default_jitter<Dim>(sym);
      _llt.compute(sym);
      if (_llt.info() != Eigen::Success || !(_llt.matrixLLT().diagonal().array() > 0.0).all())
      {
        throw NumericError(ErrorKind::NonPositiveDefinite, "Cholesky factorization failed after jitter");
      }
    }
    _log_norm = -0.5 * static_cast<double>(Dim) * std::log(2.0 * std::numbers::pi) -
                _llt.matrixLLT().diagonal().array().log().sum();
    _factor = _llt.matrixL();
  }

  [[nodiscard]] double log_pdf(Vector const& x) const
  {
    Vector const white = _llt.matrixL().solve(x - _mean);
    return _log_norm - 0.5 * white.squaredNorm();
  }

  /// log_pdf(transform(u)) without the triangular solve.
  [[nodiscard]] double log_pdf_of_standard(Vector const& standard_normal) const
  {
    return _log_norm - 0.5 * standard_normal.squaredNorm();
  }

  [[nodiscard]] double pdf(Vector const& x) const { return std::exp(log_pdf(x)); }

  /// mean + L * standard_normal
  [[nodiscard]] Vector transform(Vector const& standard_normal) const
  {
    return _mean + _factor * standard_normal;
  }

  [[nodiscard]] Vector const& mean() const { return _mean; }
  [[nodiscard]] Matrix const& factor() const { return _factor; }

private:
  Vector _mean;
  Eigen::LLT<Matrix> _llt;
  Matrix _factor;
  double _log_norm = 0.0;
};

double gaussian_logpdf(GaussianKernel const& kernel, StateVector const& x);

/// Unweighted average of the kernel means (approximate MMSE estimate).
StateVector gmm_point_estimate(GmmBelief const& belief);

[[nodiscard]] bool is_finite(StateVector const& x);

}  // namespace pfmot
