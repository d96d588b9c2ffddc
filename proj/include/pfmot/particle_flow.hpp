#pragma once

#include "pfmot/core.hpp"
#include "pfmot/measurement_model.hpp"
#include "pfmot/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <vector>

namespace pfmot
{

/// Pseudo-times 0 = λ_0 < λ_1 < ... < λ_N = 1.
struct LambdaSchedule
{
  std::vector<double> lambdas{0.0, 1.0};

  [[nodiscard]] std::size_t steps() const { return lambdas.size() - 1; }
  [[nodiscard]] double delta(std::size_t l) const { return lambdas[l] - lambdas[l - 1]; }
};

/// Geometric step sizes Δ_l ∝ ratio^(l-1) summing to one.
LambdaSchedule lambda_schedule(int n_steps, double ratio = 1.2);

/// Linear drift ζ(x, λ) = A x + b of one pseudo-time step.
struct FlowParams
{
  Covariance A = Covariance::Zero();
  StateVector b = StateVector::Zero();
};

/// Per-step drift parameters of one flow. Because the drift does not depend on the
/// individual particle, the discrete flow is affine: x_1 = transform · x_0 + offset.
struct FlowTrace
{
  LambdaSchedule schedule;
  std::vector<Covariance> A_list;
  std::vector<StateVector> b_list;
  Covariance transform = Covariance::Identity();
  StateVector offset = StateVector::Zero();
  StateVector lin_end = StateVector::Zero();
};

inline constexpr double kMinStepDeterminant = 1e-12;

template <int ZDim>
FlowParams flow_step_params(StateVector const& lin_point, StateVector const& prior_mean, Covariance const& prior_cov,
                            typename MeasurementModel<ZDim>::ZVector const& z, MeasurementModel<ZDim> const& model,
                            double lambda)
{
  using Gain = Eigen::Matrix<double, kStateDim, ZDim>;
  using ZMatrix = Eigen::Matrix<double, ZDim, ZDim>;

  auto const H = model.jacobian(lin_point);
  auto const e = (model.predict(lin_point) - H * lin_point).eval();
  Gain const PHt = prior_cov * H.transpose();
  ZMatrix const S = lambda * (H * PHt) + model.noise_cov();
  Eigen::LLT<ZMatrix> const llt(S);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().array() > 0.0).all())
  {
    throw NumericError(ErrorKind::SingularInnovation, "innovation covariance is not invertible");
  }

  FlowParams out;
  out.A = -0.5 * PHt * llt.solve(H);
  Covariance const I = Covariance::Identity();
  StateVector const inner = (I + lambda * out.A) * (PHt * (model.noise_inv() * (z - e))) + out.A * prior_mean;
  out.b = (I + 2.0 * lambda * out.A) * inner;
  if (!out.A.allFinite() || !out.b.allFinite())
  {
    throw NumericError(ErrorKind::NonFiniteParticle, "non-finite flow parameters");
  }
  return out;
}

/// Builds the flow from the prior toward z, linearizing the model at the mean that is
/// migrated alongside the particles.
template <int ZDim>
FlowTrace flow_trace(StateVector const& prior_mean, Covariance const& prior_cov,
                     typename MeasurementModel<ZDim>::ZVector const& z, MeasurementModel<ZDim> const& model,
                     LambdaSchedule const& schedule)
{
  FlowTrace trace;
  trace.schedule = schedule;
  trace.A_list.reserve(schedule.steps());
  trace.b_list.reserve(schedule.steps());
  StateVector lin = prior_mean;
  Covariance const I = Covariance::Identity();
  for (std::size_t l = 1; l <= schedule.steps(); ++l)
  {
    double const dl = schedule.delta(l);
    FlowParams const params = flow_step_params<ZDim>(lin, prior_mean, prior_cov, z, model, schedule.lambdas[l]);
    Covariance const step = I + dl * params.A;
    lin = step * lin + dl * params.b;
    trace.transform = step * trace.transform;
    trace.offset = step * trace.offset + dl * params.b;
    trace.A_list.push_back(params.A);
    trace.b_list.push_back(params.b);
  }
  if (!lin.allFinite() || !trace.transform.allFinite() || !trace.offset.allFinite())
  {
    throw NumericError(ErrorKind::NonFiniteParticle, "flow diverged");
  }
  trace.lin_end = lin;
  return trace;
}

/// θ = Π_l |det(I + Δλ_l A_l)|.
double mapping_factor(FlowTrace const& trace);

StateVector apply_flow(FlowTrace const& trace, StateVector const& x0);

/// Step-by-step Euler migration x ← x + (A_l x + b_l) Δλ_l; equals apply_flow up to rounding.
StateVector migrate_stepwise(FlowTrace const& trace, StateVector const& x0);

/// Undoes the discrete migration step by step.
StateVector reverse_flow(FlowTrace const& trace, StateVector const& x1);

struct FlowResult
{
  std::vector<StateVector> particles;
  FlowTrace trace;
};

template <int ZDim>
FlowResult particle_flow(std::vector<StateVector> const& particles, StateVector const& prior_mean,
                         Covariance const& prior_cov, typename MeasurementModel<ZDim>::ZVector const& z,
                         MeasurementModel<ZDim> const& model, LambdaSchedule const& schedule)
{
  if (particles.empty())
  {
    throw std::invalid_argument("particle_flow: no particles");
  }
  FlowResult out;
  out.trace = flow_trace<ZDim>(prior_mean, prior_cov, z, model, schedule);
  out.particles.reserve(particles.size());
  for (auto const& x : particles)
  {
    out.particles.push_back(apply_flow(out.trace, x));
  }
  return out;
}

struct WeightedParticleSet
{
  std::vector<StateVector> particles;
  std::vector<double> weights;
};

/// Importance sampling with the flow as proposal: x_0 ~ N(prior), x_1 = flow(x_0),
/// w = θ l(z|x_1) N(x_1; prior) / N(x_0; prior), unnormalized. All-zero weights are
/// returned as they are.
template <int ZDim>
WeightedParticleSet flow_importance_sample(StateVector const& prior_mean, Covariance const& prior_cov,
                                           typename MeasurementModel<ZDim>::ZVector const& z,
                                           MeasurementModel<ZDim> const& model, std::size_t n_particles,
                                           LambdaSchedule const& schedule, Rng& rng)
{
  if (n_particles == 0)
  {
    throw std::invalid_argument("invertible_flow: n_particles must be positive");
  }
  MvnDensity<kStateDim> const prior(prior_mean, prior_cov);
  FlowTrace const trace = flow_trace<ZDim>(prior_mean, prior_cov, z, model, schedule);
  double const log_theta = std::log(mapping_factor(trace));

  WeightedParticleSet out;
  out.particles.reserve(n_particles);
  out.weights.reserve(n_particles);
  for (std::size_t i = 0; i < n_particles; ++i)
  {
    StateVector const x0 = prior.transform(rng.standard_normal<kStateDim>());
    StateVector const x1 = apply_flow(trace, x0);
    double const log_w = log_theta + model.log_likelihood(z, x1) + prior.log_pdf(x1) - prior.log_pdf(x0);
    out.particles.push_back(x1);
    out.weights.push_back(std::exp(log_w));
  }
  return out;
}

[[nodiscard]] bool has_positive_weight(std::vector<double> const& weights);

template <int ZDim>
WeightedParticleSet invertible_flow(StateVector const& prior_mean, Covariance const& prior_cov,
                                    typename MeasurementModel<ZDim>::ZVector const& z,
                                    MeasurementModel<ZDim> const& model, std::size_t n_particles,
                                    LambdaSchedule const& schedule, Rng& rng)
{
  WeightedParticleSet out = flow_importance_sample<ZDim>(prior_mean, prior_cov, z, model, n_particles, schedule, rng);
  if (!has_positive_weight(out.weights))
  {
    throw NumericError(ErrorKind::DegenerateWeights, "all flow weights vanished");
  }
  return out;
}

/// Weighted mean and centered weighted covariance, regularized.
GaussianKernel gaussian_representation(WeightedParticleSet const& set);
GaussianKernel gaussian_representation(std::vector<StateVector> const& particles, std::vector<double> const& weights);

}  // namespace pfmot
