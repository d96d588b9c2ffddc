#include "pfmot/particle_flow.hpp"

#include <stdexcept>

namespace pfmot
{

LambdaSchedule lambda_schedule(int n_steps, double ratio)
{
  if (n_steps < 1)
  {
    throw std::invalid_argument("lambda_schedule: n_steps must be at least 1");
  }
  if (!(ratio >= 1.0))
  {
    throw std::invalid_argument("lambda_schedule: ratio must be at least 1");
  }
  LambdaSchedule out;
  out.lambdas.assign(static_cast<std::size_t>(n_steps) + 1, 0.0);
  double const first =
    ratio == 1.0 ? 1.0 / n_steps : (ratio - 1.0) / (std::pow(ratio, static_cast<double>(n_steps)) - 1.0);
  double step = first;
  for (int l = 1; l < n_steps; ++l)
  {
    out.lambdas[static_cast<std::size_t>(l)] = out.lambdas[static_cast<std::size_t>(l) - 1] + step;
    step *= ratio;
  }
  out.lambdas.back() = 1.0;
  for (std::size_t l = 1; l < out.lambdas.size(); ++l)
  {
    if (!(out.lambdas[l] > out.lambdas[l - 1]))
    {
      throw std::invalid_argument("lambda_schedule: steps too small to be strictly increasing");
    }
  }
  return out;
}

double mapping_factor(FlowTrace const& trace)
{
  double theta = 1.0;
  Covariance const I = Covariance::Identity();
  for (std::size_t l = 0; l < trace.A_list.size(); ++l)
  {
    double const det = std::abs((I + trace.schedule.delta(l + 1) * trace.A_list[l]).partialPivLu().determinant());
    if (!(det >= kMinStepDeterminant))
    {
      throw NumericError(ErrorKind::NonInvertibleStep, "flow step is not invertible");
    }
    theta *= det;
  }
  return theta;
}

StateVector apply_flow(FlowTrace const& trace, StateVector const& x0)
{
  StateVector const x1 = trace.transform * x0 + trace.offset;
  if (!x1.allFinite())
  {
    throw NumericError(ErrorKind::NonFiniteParticle, "migrated particle is not finite");
  }
  return x1;
}

StateVector migrate_stepwise(FlowTrace const& trace, StateVector const& x0)
{
  StateVector x = x0;
  for (std::size_t l = 0; l < trace.A_list.size(); ++l)
  {
    x += (trace.A_list[l] * x + trace.b_list[l]) * trace.schedule.delta(l + 1);
  }
  if (!x.allFinite())
  {
    throw NumericError(ErrorKind::NonFiniteParticle, "migrated particle is not finite");
  }
  return x;
}

StateVector reverse_flow(FlowTrace const& trace, StateVector const& x1)
{
  StateVector x = x1;
  Covariance const I = Covariance::Identity();
  for (std::size_t l = trace.A_list.size(); l-- > 0;)
  {
    double const dl = trace.schedule.delta(l + 1);
    x = (I + dl * trace.A_list[l]).partialPivLu().solve(x - dl * trace.b_list[l]);
  }
  return x;
}

bool has_positive_weight(std::vector<double> const& weights)
{
  for (double w : weights)
  {
    if (w > 0.0)
    {
      return true;
    }
  }
  return false;
}

GaussianKernel gaussian_representation(std::vector<StateVector> const& particles, std::vector<double> const& weights)
{
  if (particles.size() != weights.size() || particles.empty())
  {
    throw std::invalid_argument("gaussian_representation: particle and weight counts differ");
  }
  double total = 0.0;
  for (double w : weights)
  {
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total))
  {
    throw NumericError(ErrorKind::DegenerateWeights, "no positive weight");
  }
  StateVector mean = StateVector::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i)
  {
    if (weights[i] > 0.0)
    {
      mean += (weights[i] / total) * particles[i];
    }
  }
  Covariance cov = Covariance::Zero();
  for (std::size_t i = 0; i < particles.size(); ++i)
  {
    if (weights[i] > 0.0)
    {
      StateVector const d = particles[i] - mean;
      double const w = weights[i] / total;
      for (int c = 0; c < kStateDim; ++c)
      {
        cov.col(c).tail(kStateDim - c) += (w * d(c)) * d.tail(kStateDim - c);
      }
    }
  }
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return {mean, spd_regularize(cov)};
}

GaussianKernel gaussian_representation(WeightedParticleSet const& set)
{
  return gaussian_representation(set.particles, set.weights);
}

}  // namespace pfmot
