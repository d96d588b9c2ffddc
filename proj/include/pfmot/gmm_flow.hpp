#pragma once

#include "pfmot/core.hpp"
#include "pfmot/particle_flow.hpp"
#include "pfmot/rng.hpp"

#include <span>
#include <vector>

namespace pfmot
{

/// Per-kernel weighted particles together with each kernel's updated covariance.
struct WeightedKernelSet
{
  std::vector<GaussianKernel> kernels;
  std::vector<std::vector<StateVector>> particles;
  std::vector<std::vector<double>> kernel_particle_weights;
};

/// Systematic resampling: n_out indices into `weights`, selected proportionally.
std::vector<std::size_t> systematic_indices(std::span<double const> weights, std::size_t n_out, Rng& rng);

/// New kernels centred on resampled particles, each inheriting its source kernel's covariance.
std::vector<GaussianKernel> resample_kernels(WeightedKernelSet const& set, std::size_t n_out, Rng& rng);

/// Extended-Kalman covariance update P - P Hᵀ (H P Hᵀ + R)⁻¹ H P, linearized at `lin_point`.
template <int ZDim>
Covariance ekf_covariance(Covariance const& prior_cov, StateVector const& lin_point,
                          MeasurementModel<ZDim> const& model)
{
  auto const H = model.jacobian(lin_point);
  Eigen::Matrix<double, kStateDim, ZDim> const PHt = prior_cov * H.transpose();
  Eigen::Matrix<double, ZDim, ZDim> const S = H * PHt + model.noise_cov();
  Eigen::LLT<Eigen::Matrix<double, ZDim, ZDim>> const llt(S);
  if (llt.info() != Eigen::Success)
  {
    throw NumericError(ErrorKind::SingularInnovation, "innovation covariance is not invertible");
  }
  return spd_regularize(prior_cov - PHt * llt.solve(PHt.transpose()));
}

/// Flow every kernel toward z, then resample the same number of kernels from the pooled
/// weights. With one particle per kernel the kernel covariance comes from an
/// extended-Kalman update, since a single particle carries no spread.
template <int ZDim>
GmmBelief invertible_flow_gmm(GmmBelief const& belief, typename MeasurementModel<ZDim>::ZVector const& z,
                              MeasurementModel<ZDim> const& model, std::size_t n_particles,
                              LambdaSchedule const& schedule, Rng const& rng)
{
  if (belief.kernels.empty())
  {
    throw std::invalid_argument("invertible_flow_gmm: empty belief");
  }
  WeightedKernelSet set;
  for (std::size_t h = 0; h < belief.kernels.size(); ++h)
  {
    GaussianKernel const& kernel = belief.kernels[h];
    Rng kernel_rng = rng.split(h);
    WeightedParticleSet weighted =
      flow_importance_sample<ZDim>(kernel.mean, kernel.cov, z, model, n_particles, schedule, kernel_rng);
    if (!has_positive_weight(weighted.weights))
    {
      set.kernels.push_back(kernel);
    }
    else if (n_particles == 1)
    {
      set.kernels.push_back({weighted.particles.front(), ekf_covariance<ZDim>(kernel.cov, kernel.mean, model)});
    }
    else
    {
      set.kernels.push_back(gaussian_representation(weighted));
    }
    set.particles.push_back(std::move(weighted.particles));
    set.kernel_particle_weights.push_back(std::move(weighted.weights));
  }
  Rng resample_rng = rng.split(belief.kernels.size() + 0x5eedULL);
  return GmmBelief{resample_kernels(set, belief.kernels.size(), resample_rng)};
}

}  // namespace pfmot
