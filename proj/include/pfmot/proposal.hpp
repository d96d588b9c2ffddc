#pragma once

#include "pfmot/core.hpp"
#include "pfmot/measurement_model.hpp"
#include "pfmot/particle_flow.hpp"
#include "pfmot/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace pfmot
{

/// How particles for a (kernel, measurement) pair are proposed.
///  Flow:      invertible particle flow from the kernel toward the measurement
///  Prior:     the kernel itself (no migration)
///  Unscented: Gaussian from an unscented measurement update of the kernel
enum class ProposalKind
{
  Flow,
  Prior,
  Unscented,
};

struct UtParams
{
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 0.0;
};

struct ProposalOptions
{
  ProposalKind kind = ProposalKind::Flow;
  LambdaSchedule schedule = lambda_schedule(20, 1.2);
  UtParams ut;
};

using ParticleCloud = std::shared_ptr<std::vector<StateVector> const>;

/// Standard-normal draws for one kernel, shared by every measurement hypothesis.
struct KernelDraws
{
  GaussianKernel kernel;
  MvnDensity<kStateDim> density;
  std::vector<StateVector> normals;
  ParticleCloud x0;
  std::vector<double> log_prior_x0;
};

KernelDraws draw_kernel(GaussianKernel const& kernel, std::size_t n_particles, Rng& rng);

/// Likelihood terms further than this many noise standard deviations from the
/// measurement underflow to zero in double precision and are skipped.
inline constexpr double kLikelihoodWindow = 40.0;

/// Scalar predictions h(x) of a fixed particle cloud, sorted so that a measurement
/// only visits the particles whose likelihood can be nonzero.
class SortedPredictions
{
public:
  SortedPredictions(std::vector<StateVector> const& particles, ScalarModel const& model);

  /// Calls f(particle_index, l(z|x)) for every particle in the window around z, in
  /// ascending order of prediction.
  template <class F>
  void for_each_in_window(double z, F&& f) const
  {
    auto const lo = std::lower_bound(_values.begin(), _values.end(), z - _window);
    auto const hi = std::upper_bound(lo, _values.end(), z + _window);
    for (auto it = lo; it != hi; ++it)
    {
      auto const k = static_cast<std::size_t>(it - _values.begin());
      f(_order[k], std::exp(_model->log_likelihood_of_residual(ScalarModel::ZVector::Constant(z - *it))));
    }
  }

private:
  ScalarModel const* _model;
  std::vector<double> _values;
  std::vector<std::uint32_t> _order;
  double _window = 0.0;
};

/// Proposed particles with log(prior(x) / proposal(x)); an empty `log_ratio` means zero
/// for every particle. `cov` is the covariance of the Gaussian the kernel is mapped to
/// (T P Tᵀ for the flow, the unscented posterior for the UT); unset for the prior.
struct ProposalSet
{
  ParticleCloud particles;
  std::vector<double> log_ratio;
  std::optional<Covariance> cov;
  bool moved = false;
};

/// Unscented measurement update of a Gaussian kernel.
template <int ZDim>
GaussianKernel unscented_update(GaussianKernel const& kernel, typename MeasurementModel<ZDim>::ZVector const& z,
                                MeasurementModel<ZDim> const& model, UtParams const& ut)
{
  using ZVector = typename MeasurementModel<ZDim>::ZVector;
  constexpr int n = kStateDim;
  double const lambda = ut.alpha * ut.alpha * (n + ut.kappa) - n;
  double const spread = n + lambda;
  if (!(spread > 0.0))
  {
    throw std::invalid_argument("unscented_update: alpha and kappa give a non-positive spread");
  }
  Eigen::LLT<Covariance> const llt(0.5 * (kernel.cov + kernel.cov.transpose()));
  if (llt.info() != Eigen::Success)
  {
    throw NumericError(ErrorKind::NonPositiveDefinite, "unscented_update: kernel covariance");
  }
  Covariance const root = std::sqrt(spread) * Covariance(llt.matrixL());

  std::vector<StateVector> points;
  points.reserve(2 * n + 1);
  points.push_back(kernel.mean);
  for (int i = 0; i < n; ++i)
  {
    points.push_back(kernel.mean + root.col(i));
    points.push_back(kernel.mean - root.col(i));
  }
  double const w0_mean = lambda / spread;
  double const w0_cov = w0_mean + 1.0 - ut.alpha * ut.alpha + ut.beta;
  double const wi = 1.0 / (2.0 * spread);

  std::vector<ZVector> predicted;
  predicted.reserve(points.size());
  ZVector z_mean = ZVector::Zero();
  for (std::size_t k = 0; k < points.size(); ++k)
  {
    predicted.push_back(model.predict(points[k]));
    z_mean += (k == 0 ? w0_mean : wi) * predicted.back();
  }
  Eigen::Matrix<double, ZDim, ZDim> S = model.noise_cov();
  Eigen::Matrix<double, kStateDim, ZDim> C = Eigen::Matrix<double, kStateDim, ZDim>::Zero();
  for (std::size_t k = 0; k < points.size(); ++k)
  {
    double const w = k == 0 ? w0_cov : wi;
    ZVector const dz = predicted[k] - z_mean;
    S += w * dz * dz.transpose();
    C += w * (points[k] - kernel.mean) * dz.transpose();
  }
  Eigen::LLT<Eigen::Matrix<double, ZDim, ZDim>> const s_llt(S);
  if (s_llt.info() != Eigen::Success)
  {
    throw NumericError(ErrorKind::SingularInnovation, "unscented_update: innovation covariance");
  }
  Eigen::Matrix<double, kStateDim, ZDim> const K = s_llt.solve(C.transpose()).transpose();
  GaussianKernel out;
  out.mean = kernel.mean + K * (z - z_mean);
  out.cov = spd_regularize(kernel.cov - K * S * K.transpose());
  return out;
}

template <int ZDim>
ProposalSet propose(KernelDraws const& draws, typename MeasurementModel<ZDim>::ZVector const& z,
                    MeasurementModel<ZDim> const& model, ProposalOptions const& options)
{
  ProposalSet out;
  std::size_t const n = draws.normals.size();
  switch (options.kind)
  {
    case ProposalKind::Prior:
      out.particles = draws.x0;
      return out;
    case ProposalKind::Flow:
    {
      FlowTrace const trace = flow_trace<ZDim>(draws.kernel.mean, draws.kernel.cov, z, model, options.schedule);
      double const log_theta = std::log(mapping_factor(trace));
      auto moved = std::make_shared<std::vector<StateVector>>();
      moved->reserve(n);
      out.log_ratio.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
      {
        moved->push_back(apply_flow(trace, (*draws.x0)[i]));
        out.log_ratio.push_back(log_theta + draws.density.log_pdf(moved->back()) - draws.log_prior_x0[i]);
      }
      out.particles = std::move(moved);
      out.cov = trace.transform * draws.kernel.cov * trace.transform.transpose();
      out.moved = true;
      return out;
    }
    case ProposalKind::Unscented:
    {
      GaussianKernel const ut = unscented_update<ZDim>(draws.kernel, z, model, options.ut);
      MvnDensity<kStateDim> const proposal(ut.mean, ut.cov);
      auto moved = std::make_shared<std::vector<StateVector>>();
      moved->reserve(n);
      out.log_ratio.reserve(n);
      for (std::size_t i = 0; i < n; ++i)
      {
        moved->push_back(proposal.transform(draws.normals[i]));
        out.log_ratio.push_back(draws.density.log_pdf(moved->back()) - proposal.log_pdf(moved->back()));
      }
      out.particles = std::move(moved);
      out.cov = ut.cov;
      out.moved = true;
      return out;
    }
  }
  throw std::logic_error("propose: unknown proposal kind");
}

}  // namespace pfmot
