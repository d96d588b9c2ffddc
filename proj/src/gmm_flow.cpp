#include "pfmot/gmm_flow.hpp"

#include <stdexcept>

namespace pfmot
{

std::vector<std::size_t> systematic_indices(std::span<double const> weights, std::size_t n_out, Rng& rng)
{
  if (n_out == 0)
  {
    throw std::invalid_argument("resampling: n_out must be positive");
  }
  double total = 0.0;
  for (double w : weights)
  {
    if (w < 0.0)
    {
      throw std::invalid_argument("resampling: negative weight");
    }
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total))
  {
    throw NumericError(ErrorKind::DegenerateWeights, "resampling: total weight is not positive");
  }
  double const stride = total / static_cast<double>(n_out);
  double target = rng.uniform() * stride;
  std::vector<std::size_t> out;
  out.reserve(n_out);
  std::size_t idx = 0;
  double cumulative = weights[0];
  for (std::size_t k = 0; k < n_out; ++k)
  {
    while (cumulative <= target && idx + 1 < weights.size())
    {
      ++idx;
      cumulative += weights[idx];
    }
    // Rounding can leave the walk on a zero-weight tail entry.
    std::size_t chosen = idx;
    while (weights[chosen] <= 0.0 && chosen > 0)
    {
      --chosen;
    }
    out.push_back(chosen);
    target += stride;
  }
  return out;
}

std::vector<GaussianKernel> resample_kernels(WeightedKernelSet const& set, std::size_t n_out, Rng& rng)
{
  if (set.kernels.size() != set.particles.size() || set.kernels.size() != set.kernel_particle_weights.size())
  {
    throw std::invalid_argument("resample_kernels: inconsistent kernel set");
  }
  std::size_t n_flat = 0;
  for (auto const& p : set.particles)
  {
    n_flat += p.size();
  }
  std::vector<double> flat;
  std::vector<std::pair<std::size_t, std::size_t>> origin;
  flat.reserve(n_flat);
  origin.reserve(n_flat);
  for (std::size_t h = 0; h < set.kernels.size(); ++h)
  {
    if (set.particles[h].size() != set.kernel_particle_weights[h].size())
    {
      throw std::invalid_argument("resample_kernels: particle and weight counts differ");
    }
    for (std::size_t i = 0; i < set.particles[h].size(); ++i)
    {
      flat.push_back(set.kernel_particle_weights[h][i]);
      origin.emplace_back(h, i);
    }
  }
  if (flat.empty())
  {
    throw NumericError(ErrorKind::DegenerateWeights, "resample_kernels: no particles");
  }
  std::vector<GaussianKernel> out;
  out.reserve(n_out);
  for (std::size_t idx : systematic_indices(flat, n_out, rng))
  {
    auto const [h, i] = origin[idx];
    out.push_back({set.particles[h][i], set.kernels[h].cov});
  }
  return out;
}

}  // namespace pfmot
