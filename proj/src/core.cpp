#include "pfmot/core.hpp"

#include <Eigen/Eigenvalues>

namespace pfmot
{

std::string to_string(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::NonPositiveDefinite:
      return "NonPositiveDefinite";
    case ErrorKind::StillSingular:
      return "StillSingular";
    case ErrorKind::SingularInnovation:
      return "SingularInnovation";
    case ErrorKind::NonFiniteParticle:
      return "NonFiniteParticle";
    case ErrorKind::NonInvertibleStep:
      return "NonInvertibleStep";
    case ErrorKind::DegenerateWeights:
      return "DegenerateWeights";
    case ErrorKind::DegenerateGeometry:
      return "DegenerateGeometry";
  }
  return "UnknownError";
}

Covariance spd_regularize(Covariance const& cov, double jitter)
{
  if (!(jitter >= 0.0))
  {
    throw std::invalid_argument("spd_regularize: jitter must be nonnegative");
  }
  Covariance out = 0.5 * (cov + cov.transpose());
  out.diagonal().array() += jitter;
  Eigen::SelfAdjointEigenSolver<Covariance> eig(out, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0))
  {
    throw NumericError(ErrorKind::StillSingular, "covariance not positive definite after jitter");
  }
  return out;
}

Covariance spd_regularize(Covariance const& cov)
{
  Covariance const sym = 0.5 * (cov + cov.transpose());
  return spd_regularize(sym, default_jitter<kStateDim>(sym));
}

double gaussian_logpdf(GaussianKernel const& kernel, StateVector const& x)
{
  return MvnDensity<kStateDim>(kernel.mean, kernel.cov).log_pdf(x);
}

StateVector gmm_point_estimate(GmmBelief const& belief)
{
  if (belief.kernels.empty())
  {
    throw std::invalid_argument("gmm_point_estimate: empty belief");
  }
  StateVector sum = StateVector::Zero();
  for (auto const& kernel : belief.kernels)
  {
    sum += kernel.mean;
  }
  return sum / static_cast<double>(belief.kernels.size());
}

bool is_finite(StateVector const& x) { return x.allFinite(); }

}  // namespace pfmot
