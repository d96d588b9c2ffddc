#include "pfmot/proposal.hpp"

#include <numeric>
#include <utility>

namespace pfmot
{

KernelDraws draw_kernel(GaussianKernel const& kernel, std::size_t n_particles, Rng& rng)
{
  if (n_particles == 0)
  {
    throw std::invalid_argument("draw_kernel: n_particles must be positive");
  }
  KernelDraws out{kernel, MvnDensity<kStateDim>(kernel.mean, kernel.cov), {}, nullptr, {}};
  auto x0 = std::make_shared<std::vector<StateVector>>();
  out.normals.reserve(n_particles);
  x0->reserve(n_particles);
  out.log_prior_x0.reserve(n_particles);
  for (std::size_t i = 0; i < n_particles; ++i)
  {
    out.normals.push_back(rng.standard_normal<kStateDim>());
    x0->push_back(out.density.transform(out.normals.back()));
    out.log_prior_x0.push_back(out.density.log_pdf_of_standard(out.normals.back()));
  }
  out.x0 = std::move(x0);
  return out;
}

SortedPredictions::SortedPredictions(std::vector<StateVector> const& particles, ScalarModel const& model)
  : _model(&model), _window(kLikelihoodWindow * std::sqrt(model.noise_cov()(0, 0)))
{
  std::vector<std::pair<double, std::uint32_t>> keyed;
  keyed.reserve(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i)
  {
    try
    {
      keyed.emplace_back(model.predict(particles[i])(0), static_cast<std::uint32_t>(i));
    }
    catch (NumericError const&)
    {
      // A particle sitting on a receiver has zero likelihood.
    }
  }
  std::sort(keyed.begin(), keyed.end());
  _values.reserve(keyed.size());
  _order.reserve(keyed.size());
  for (auto const& [value, index] : keyed)
  {
    _values.push_back(value);
    _order.push_back(index);
  }
}

}  // namespace pfmot
