#include "pfmot/mot_filter.hpp"

#include "pfmot/gmm_flow.hpp"

#include <stdexcept>
#include <string>

namespace pfmot
{

namespace
{

// Stream keys below the per-sensor stream.
constexpr std::uint64_t kNewObjectsKey = 1;
constexpr std::uint64_t kEvaluateKey = 2;
constexpr std::uint64_t kUpdateKey = 3;

constexpr std::uint64_t kBirthMeansKey = 1;
constexpr std::uint64_t kBirthDrawsKey = 2;
constexpr std::uint64_t kBirthResampleKey = 3;

}  // namespace

MotionModel MotionModel::constant_velocity(double period, double sigma_w, double p_survival)
{
  MotionModel out;
  out.p_survival = p_survival;
  double const q = sigma_w * sigma_w;
  for (int axis = 0; axis < 3; ++axis)
  {
    out.G(axis, axis + 3) = period;
    out.Q(axis, axis) = q * period * period * period / 3.0;
    out.Q(axis, axis + 3) = q * period * period / 2.0;
    out.Q(axis + 3, axis) = q * period * period / 2.0;
    out.Q(axis + 3, axis + 3) = q * period;
  }
  return out;
}

BirthModel BirthModel::from_roi(Box const& roi, double mean_births, double velocity_prior_std, double shrink)
{
  if (!((roi.hi.array() > roi.lo.array()).all()))
  {
    throw std::invalid_argument("birth model: empty region of interest");
  }
  BirthModel out;
  out.roi = roi;
  out.mean_births = mean_births;
  out.velocity_prior_std = velocity_prior_std;
  out.kernel_cov = Covariance::Zero();
  for (int axis = 0; axis < 3; ++axis)
  {
    double const range = roi.hi(axis) - roi.lo(axis);
    out.kernel_cov(axis, axis) = shrink * range * range / 12.0;
    out.kernel_cov(axis + 3, axis + 3) = shrink * velocity_prior_std * velocity_prior_std;
  }
  return out;
}

TrackerState predict(TrackerState const& state, MotionModel const& motion)
{
  TrackerState out = state;
  for (auto& po : out.pos)
  {
    for (auto& kernel : po.belief.kernels)
    {
      kernel.mean = motion.G * kernel.mean + motion.u_mean;
      kernel.cov = motion.G * kernel.cov * motion.G.transpose() + motion.Q;
      kernel.cov = 0.5 * (kernel.cov + kernel.cov.transpose());
    }
    po.existence *= motion.p_survival;
  }
  return out;
}

std::vector<NewObject> new_objects(std::vector<double> const& measurements, BirthModel const& birth,
                                   ScalarModel const& model, DetectionParams const& detection,
                                   std::size_t n_particles, std::size_t n_kernels, ProposalOptions const& proposal,
                                   Rng const& rng)
{
  if (n_particles == 0 || n_kernels == 0)
  {
    throw std::invalid_argument("new_objects: particle and kernel counts must be positive");
  }
  std::vector<NewObject> out;
  if (measurements.empty())
  {
    return out;
  }

  GmmBelief prior;
  Rng means_rng = rng.split(kBirthMeansKey);
  for (std::size_t h = 0; h < n_kernels; ++h)
  {
    GaussianKernel kernel;
    for (int axis = 0; axis < 3; ++axis)
    {
      kernel.mean(axis) = means_rng.uniform(birth.roi.lo(axis), birth.roi.hi(axis));
    }
    for (int axis = 3; axis < kStateDim; ++axis)
    {
      kernel.mean(axis) = means_rng.normal(0.0, birth.velocity_prior_std);
    }
    kernel.cov = birth.kernel_cov;
    prior.kernels.push_back(kernel);
  }

  // Draws are shared by all measurements; only the proposal depends on z.
  std::vector<KernelDraws> draws;
  draws.reserve(n_kernels);
  for (std::size_t h = 0; h < n_kernels; ++h)
  {
    Rng draw_rng = rng.split({kBirthDrawsKey, h});
    draws.push_back(draw_kernel(prior.kernels[h], n_particles, draw_rng));
  }
  std::vector<std::optional<SortedPredictions>> predictions(n_kernels);
  auto prior_predictions = [&](std::size_t h) -> SortedPredictions const& {
    if (!predictions[h])
    {
      predictions[h].emplace(*draws[h].x0, model);
    }
    return *predictions[h];
  };

  for (double z : measurements)
  {
    ScalarModel::ZVector const zv = ScalarModel::ZVector::Constant(z);
    double const clutter = detection.mu_fp * model.fp_density(zv);
    if (!(clutter > 0.0))
    {
      throw std::invalid_argument("new_objects: measurement has zero false-positive density");
    }
    WeightedKernelSet set;
    double total = 0.0;
    for (std::size_t h = 0; h < n_kernels; ++h)
    {
      std::vector<StateVector> particles;
      std::vector<double> weights;
      if (proposal.kind == ProposalKind::Prior)
      {
        prior_predictions(h).for_each_in_window(z, [&](std::uint32_t i, double likelihood) {
          if (likelihood > 0.0)
          {
            particles.push_back((*draws[h].x0)[i]);
            weights.push_back(likelihood);
          }
        });
      }
      else
      {
        try
        {
          ProposalSet const proposed = propose<1>(draws[h], zv, model, proposal);
          for (std::size_t i = 0; i < proposed.particles->size(); ++i)
          {
            StateVector const& x = (*proposed.particles)[i];
            double log_l = 0.0;
            try
            {
              log_l = model.log_likelihood(zv, x);
            }
            catch (NumericError const&)
            {
              continue;
            }
            double const w = std::exp(proposed.log_ratio[i] + log_l);
            if (w > 0.0 && std::isfinite(w))
            {
              particles.push_back(x);
              weights.push_back(w);
            }
          }
        }
        catch (NumericError const&)
        {
          // This kernel contributes nothing for this measurement.
          particles.clear();
          weights.clear();
        }
      }
      for (double w : weights)
      {
        total += w;
      }
      if (!weights.empty())
      {
        set.kernels.push_back(gaussian_representation(particles, weights));
        set.particles.push_back(std::move(particles));
        set.kernel_particle_weights.push_back(std::move(weights));
      }
    }

    NewObject po;
    if (total > 0.0 && std::isfinite(total))
    {
      po.xi = 1.0 + birth.mean_births / (static_cast<double>(n_kernels * n_particles) * clutter) * total;
      Rng resample_rng = rng.split(kBirthResampleKey);
      po.belief.kernels = resample_kernels(set, n_kernels, resample_rng);
    }
    else
    {
      po.xi = 1.0;
      po.belief = prior;
    }
    out.push_back(std::move(po));
  }
  return out;
}

double new_object_existence(double xi, double iota)
{
  double const a = (xi - 1.0) * iota;
  return a / (a + 1.0);
}

TrackerState single_sensor_update(TrackerState const& state, SensorBatch const& batch, ScalarModel const& model,
                                  TrackerSettings const& settings, BirthModel const& birth, Rng const& rng,
                                  UpdateStats* stats)
{
  std::size_t const J = state.pos.size();
  std::vector<NewObject> born =
    new_objects(batch.values, birth, model, settings.detection, settings.n_particles_new, settings.n_kernels,
                settings.new_proposal, rng.split(kNewObjectsKey));

  EvaluationOptions const legacy_options{settings.n_particles_legacy, settings.legacy_proposal, settings.gate};
  std::vector<EvaluationBlocks> blocks;
  std::vector<std::vector<double>> betas;
  blocks.reserve(J);
  betas.reserve(J);
  for (auto const& po : state.pos)
  {
    auto const label = static_cast<std::uint64_t>(po.label);
    blocks.push_back(evaluate_legacy(po.belief, po.existence, batch.values, model, settings.detection,
                                     legacy_options, rng.split({kEvaluateKey, label})));
    betas.push_back(blocks.back().beta);
  }
  std::vector<double> xi;
  xi.reserve(born.size());
  for (auto const& n : born)
  {
    xi.push_back(n.xi);
  }
  AssocMessages const messages = spa_da(betas, xi, settings.spa_max_iters, settings.spa_tol);

  TrackerState out;
  out.step = state.step;
  out.label_counter = state.label_counter;
  out.pos.reserve(J + born.size());
  for (std::size_t j = 0; j < J; ++j)
  {
    PotentialObject po = state.pos[j];
    auto const label = static_cast<std::uint64_t>(po.label);
    LegacyUpdate update = update_legacy(blocks[j], messages.kappa[j], settings.n_kernels,
                                        rng.split({kUpdateKey, label}), settings.numerator,
                                        settings.kernel_covariance);
    po.belief = std::move(update.belief);
    po.existence = update.existence;
    blocks[j] = EvaluationBlocks{};
    out.pos.push_back(std::move(po));
  }
  for (std::size_t m = 0; m < born.size(); ++m)
  {
    PotentialObject po;
    po.label = out.label_counter++;
    po.belief = std::move(born[m].belief);
    po.existence = new_object_existence(born[m].xi, messages.iota[m]);
    po.birth_time = state.step;
    po.birth_sensor = batch.sensor;
    out.pos.push_back(std::move(po));
  }
  if (stats != nullptr)
  {
    stats->legacy = J;
    stats->born = born.size();
    stats->spa_converged = messages.converged;
    stats->beta = std::move(betas);
    stats->xi = std::move(xi);
  }
  return out;
}

TrackerState prune(TrackerState const& state, double threshold)
{
  if (!(threshold >= 0.0 && threshold <= 1.0))
  {
    throw std::invalid_argument("prune: threshold outside [0, 1]");
  }
  TrackerState out;
  out.step = state.step;
  out.label_counter = state.label_counter;
  for (auto const& po : state.pos)
  {
    if (!(po.existence < threshold))
    {
      out.pos.push_back(po);
    }
  }
  return out;
}

TrackerState multisensor_step(TrackerState const& state, std::vector<SensorBatch> const& batches,
                              MotionModel const& motion, std::vector<ScalarModel const*> const& models,
                              TrackerSettings const& settings, BirthModel const& birth, Rng const& rng)
{
  TrackerState current = predict(state, motion);
  current.step = state.step + 1;
  for (auto const& batch : batches)
  {
    if (batch.sensor < 0 || static_cast<std::size_t>(batch.sensor) >= models.size())
    {
      throw std::invalid_argument("multisensor_step: batch refers to an unknown sensor");
    }
    Rng const sensor_rng = rng.split(static_cast<std::uint64_t>(batch.sensor) + 1);
    try
    {
      current = single_sensor_update(current, batch, *models[static_cast<std::size_t>(batch.sensor)], settings,
                                     birth, sensor_rng);
    }
    catch (NumericError const& e)
    {
      throw NumericError(e.kind(), "sensor " + std::to_string(batch.sensor) + " with " +
                                     std::to_string(current.pos.size()) + " objects: " + e.what());
    }
    current = prune(current, settings.p_pr);
  }
  return current;
}

std::vector<Estimate> extract_estimates(TrackerState const& state, double threshold)
{
  std::vector<Estimate> out;
  for (auto const& po : state.pos)
  {
    if (po.existence > threshold)
    {
      out.push_back({po.label, gmm_point_estimate(po.belief), po.existence});
    }
  }
  return out;
}

}  // namespace pfmot
