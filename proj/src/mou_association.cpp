#include "pfmot/mou_association.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pfmot
{

namespace
{

double fill_prior_block(SortedPredictions const& predictions, double z, double omega, HypothesisBlock& block)
{
  double sum = 0.0;
  predictions.for_each_in_window(z, [&](std::uint32_t i, double likelihood) {
    double const mass = likelihood * omega;
    if (mass > 0.0)
    {
      block.index.push_back(i);
      block.mass.push_back(mass);
      sum += mass;
    }
  });
  return sum;
}

bool kernel_gates(GaussianKernel const& kernel, double z, ScalarModel const& model, double g)
{
  try
  {
    auto const H = model.jacobian(kernel.mean);
    double const s = (H * kernel.cov * H.transpose())(0, 0) + model.noise_cov()(0, 0);
    return std::abs(z - model.predict(kernel.mean)(0)) <= g * std::sqrt(s);
  }
  catch (NumericError const&)
  {
    return true;
  }
}

double moved_block(ProposalSet const& proposal, double z, double omega, ScalarModel const& model,
                   HypothesisBlock& block)
{
  auto const& particles = *proposal.particles;
  ScalarModel::ZVector const zv = ScalarModel::ZVector::Constant(z);
  std::vector<std::uint32_t> index;
  std::vector<double> mass;
  double sum = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i)
  {
    double log_l = 0.0;
    try
    {
      log_l = model.log_likelihood(zv, particles[i]);
    }
    catch (NumericError const&)
    {
      continue;
    }
    double const log_ratio = proposal.log_ratio.empty() ? 0.0 : proposal.log_ratio[i];
    double const m = std::exp(log_ratio + log_l) * omega;
    if (!std::isfinite(m))
    {
      throw NumericError(ErrorKind::NonFiniteParticle, "non-finite importance weight");
    }
    if (m > 0.0)
    {
      index.push_back(static_cast<std::uint32_t>(i));
      mass.push_back(m);
      sum += m;
    }
  }
  block.particles = proposal.particles;
  block.index = std::move(index);
  block.mass = std::move(mass);
  block.cov = proposal.cov;
  block.moved = proposal.moved;
  return sum;
}

}  // namespace

double missed_detection_beta(double existence, double p_d) { return (1.0 - p_d) * existence + (1.0 - existence); }

EvaluationBlocks evaluate_legacy(GmmBelief const& belief, double existence, std::vector<double> const& measurements,
                                 ScalarModel const& model, DetectionParams const& detection,
                                 EvaluationOptions const& options, Rng const& rng)
{
  if (!(existence >= 0.0 && existence <= 1.0))
  {
    throw std::invalid_argument("evaluate_legacy: existence outside [0, 1]");
  }
  if (belief.kernels.empty() || options.n_particles == 0)
  {
    throw std::invalid_argument("evaluate_legacy: empty belief or zero particles");
  }
  std::size_t const M = measurements.size();
  std::size_t const Nk = belief.kernels.size();
  std::size_t const Np = options.n_particles;

  EvaluationBlocks out;
  out.n_particles = Np;
  out.existence = existence;
  out.detection = detection;
  out.kernels = belief.kernels;
  out.measurements = measurements;
  out.beta.assign(M + 1, 0.0);
  out.beta[0] = missed_detection_beta(existence, detection.p_d);
  out.clutter.resize(M);
  out.gated_in.assign(M, true);
  for (std::size_t m = 0; m < M; ++m)
  {
    out.clutter[m] = detection.mu_fp * model.fp_density(ScalarModel::ZVector::Constant(measurements[m]));
    if (!(out.clutter[m] > 0.0))
    {
      throw std::invalid_argument("evaluate_legacy: measurement has zero false-positive density");
    }
    if (options.gate.enabled)
    {
      out.gated_in[m] = std::any_of(belief.kernels.begin(), belief.kernels.end(), [&](GaussianKernel const& k) {
        return kernel_gates(k, measurements[m], model, options.gate.g);
      });
    }
  }

  double const omega = existence / static_cast<double>(Np);
  std::vector<double> sums(M, 0.0);
  out.blocks.resize(Nk);
  for (std::size_t h = 0; h < Nk; ++h)
  {
    Rng kernel_rng = rng.split(h);
    KernelDraws const draws = draw_kernel(belief.kernels[h], Np, kernel_rng);
    auto& row = out.blocks[h];
    row.resize(M + 1);

    HypothesisBlock& unmoved = row[0];
    unmoved.particles = draws.x0;
    if (omega > 0.0)
    {
      unmoved.index.resize(Np);
      std::iota(unmoved.index.begin(), unmoved.index.end(), 0U);
      unmoved.mass.assign(Np, omega);
    }

    std::optional<SortedPredictions> predictions;
    auto prior_block = [&](std::size_t m, bool fallback) {
      if (!predictions)
      {
        predictions.emplace(*draws.x0, model);
      }
      HypothesisBlock& block = row[m + 1];
      block = HypothesisBlock{};
      block.particles = draws.x0;
      block.fallback = fallback;
      sums[m] += fill_prior_block(*predictions, measurements[m], omega, block);
    };

    for (std::size_t m = 0; m < M; ++m)
    {
      if (!out.gated_in[m] || omega == 0.0)
      {
        continue;
      }
      if (options.proposal.kind == ProposalKind::Prior)
      {
        prior_block(m, false);
        continue;
      }
      try
      {
        ProposalSet const proposal =
          propose<1>(draws, ScalarModel::ZVector::Constant(measurements[m]), model, options.proposal);
        HypothesisBlock block;
        double const sum = moved_block(proposal, measurements[m], omega, model, block);
        row[m + 1] = std::move(block);
        sums[m] += sum;
      }
      catch (NumericError const&)
      {
        prior_block(m, true);
      }
    }
  }
  for (std::size_t m = 0; m < M; ++m)
  {
    out.beta[m + 1] = detection.p_d / out.clutter[m] * sums[m] / static_cast<double>(Nk);
  }
  return out;
}

AssocMessages spa_da(std::vector<std::vector<double>> const& beta_legacy, std::vector<double> const& xi_new,
                     int max_iters, double tol)
{
  std::size_t const J = beta_legacy.size();
  std::size_t const M = xi_new.size();
  for (double xi : xi_new)
  {
    if (!(xi >= 1.0) || !std::isfinite(xi))
    {
      throw std::invalid_argument("spa_da: new-object messages must be finite and at least 1");
    }
  }
  for (auto const& beta : beta_legacy)
  {
    if (beta.size() != M + 1 || !(beta[0] > 0.0))
    {
      throw std::invalid_argument("spa_da: each beta needs M + 1 entries and a positive first entry");
    }
  }

  AssocMessages out;
  std::vector<std::vector<double>> nu(J, std::vector<double>(M, 1.0));
  out.phi.assign(J, std::vector<double>(M, 0.0));
  out.converged = J == 0 || M == 0;
  for (int iter = 0; iter < max_iters && !out.converged; ++iter)
  {
    for (std::size_t j = 0; j < J; ++j)
    {
      auto const& beta = beta_legacy[j];
      double total = beta[0];
      for (std::size_t m = 0; m < M; ++m)
      {
        total += beta[m + 1] * nu[j][m];
      }
      for (std::size_t m = 0; m < M; ++m)
      {
        double const denom = total - beta[m + 1] * nu[j][m];
        out.phi[j][m] = beta[m + 1] / std::max(denom, beta[0]);
      }
    }
    double change = 0.0;
    for (std::size_t m = 0; m < M; ++m)
    {
      double column = 0.0;
      for (std::size_t j = 0; j < J; ++j)
      {
        column += out.phi[j][m];
      }
      for (std::size_t j = 0; j < J; ++j)
      {
        double const updated = 1.0 / (xi_new[m] + column - out.phi[j][m]);
        change = std::max(change, std::abs(updated - nu[j][m]));
        nu[j][m] = updated;
      }
    }
    out.iterations = iter + 1;
    out.converged = change < tol;
  }
  // Recompute the outgoing messages from the final incoming ones.
  for (std::size_t j = 0; j < J; ++j)
  {
    auto const& beta = beta_legacy[j];
    double total = beta[0];
    for (std::size_t m = 0; m < M; ++m)
    {
      total += beta[m + 1] * nu[j][m];
    }
    for (std::size_t m = 0; m < M; ++m)
    {
      out.phi[j][m] = beta[m + 1] / std::max(total - beta[m + 1] * nu[j][m], beta[0]);
    }
  }

  out.kappa.resize(J);
  for (std::size_t j = 0; j < J; ++j)
  {
    out.kappa[j].assign(M + 1, 1.0);
    for (std::size_t m = 0; m < M; ++m)
    {
      out.kappa[j][m + 1] = nu[j][m];
    }
  }
  out.iota.assign(M, 1.0);
  for (std::size_t m = 0; m < M; ++m)
  {
    double column = 0.0;
    for (std::size_t j = 0; j < J; ++j)
    {
      column += out.phi[j][m];
    }
    out.iota[m] = 1.0 / (1.0 + column);
  }
  return out;
}

LegacyPosterior legacy_posterior(EvaluationBlocks const& blocks, std::vector<double> const& kappa,
                                 UpdateNumerator numerator)
{
  std::size_t const M = blocks.n_measurements();
  if (kappa.size() != M + 1)
  {
    throw std::invalid_argument("legacy_posterior: kappa needs M + 1 entries");
  }
  double const p_d = blocks.detection.p_d;
  auto kappa_of = [&](std::size_t a) { return numerator == UpdateNumerator::KappaWeighted ? kappa[a] : 1.0; };

  LegacyPosterior out;
  out.particles.resize(blocks.n_kernels());
  out.weights.resize(blocks.n_kernels());
  double total = 0.0;
  for (std::size_t h = 0; h < blocks.n_kernels(); ++h)
  {
    std::size_t pooled = 0;
    for (auto const& block : blocks.blocks[h])
    {
      pooled += block.index.size();
    }
    out.particles[h].reserve(pooled);
    out.weights[h].reserve(pooled);
    for (std::size_t a = 0; a <= M; ++a)
    {
      HypothesisBlock const& block = blocks.blocks[h][a];
      if (block.index.empty())
      {
        continue;
      }
      double const factor = (a == 0 ? (1.0 - p_d) : p_d / blocks.clutter[a - 1]) * kappa_of(a);
      if (!(factor > 0.0))
      {
        continue;
      }
      auto const& cloud = *block.particles;
      for (std::size_t k = 0; k < block.index.size(); ++k)
      {
        double const w = factor * block.mass[k];
        out.particles[h].push_back(cloud[block.index[k]]);
        out.weights[h].push_back(w);
        total += w;
      }
    }
  }
  out.total_mass = total / static_cast<double>(blocks.n_kernels());
  double const denom = out.total_mass + (1.0 - blocks.existence) * kappa[0];
  out.existence = denom > 0.0 ? std::clamp(out.total_mass / denom, 0.0, 1.0) : 0.0;
  return out;
}

namespace
{

/// Moment match over the hypotheses of kernel h; nullopt when a weighted hypothesis has
/// no Gaussian of its own.
std::optional<Covariance> proposal_covariance(EvaluationBlocks const& blocks, std::vector<double> const& kappa,
                                              UpdateNumerator numerator, std::size_t h)
{
  std::size_t const M = blocks.n_measurements();
  double const p_d = blocks.detection.p_d;
  std::vector<double> weight(M + 1, 0.0);
  std::vector<StateVector> mean(M + 1, StateVector::Zero());
  double total = 0.0;
  for (std::size_t a = 0; a <= M; ++a)
  {
    HypothesisBlock const& block = blocks.blocks[h][a];
    double const factor = (a == 0 ? (1.0 - p_d) : p_d / blocks.clutter[a - 1]) *
                          (numerator == UpdateNumerator::KappaWeighted ? kappa[a] : 1.0);
    if (block.index.empty() || !(factor > 0.0))
    {
      continue;
    }
    if (a > 0 && !block.cov)
    {
      return std::nullopt;
    }
    auto const& cloud = *block.particles;
    for (std::size_t k = 0; k < block.index.size(); ++k)
    {
      weight[a] += factor * block.mass[k];
      mean[a] += factor * block.mass[k] * cloud[block.index[k]];
    }
    total += weight[a];
  }
  if (!(total > 0.0))
  {
    return std::nullopt;
  }
  StateVector centre = StateVector::Zero();
  for (std::size_t a = 0; a <= M; ++a)
  {
    centre += mean[a] / total;
  }
  Covariance cov = Covariance::Zero();
  for (std::size_t a = 0; a <= M; ++a)
  {
    if (weight[a] > 0.0)
    {
      StateVector const d = mean[a] / weight[a] - centre;
      Covariance const& own = a == 0 ? blocks.kernels[h].cov : *blocks.blocks[h][a].cov;
      cov += (weight[a] / total) * (own + d * d.transpose());
    }
  }
  return spd_regularize(cov);
}

}  // namespace

LegacyUpdate update_legacy(EvaluationBlocks const& blocks, std::vector<double> const& kappa,
                           std::size_t n_kernels_out, Rng const& rng, UpdateNumerator numerator,
                           KernelCovariance covariance)
{
  if (kappa.empty() || kappa[0] != 1.0)
  {
    throw std::invalid_argument("update_legacy: kappa must start with 1");
  }
  LegacyPosterior post = legacy_posterior(blocks, kappa, numerator);
  LegacyUpdate out;
  if (!(post.total_mass > 0.0) || !std::isfinite(post.total_mass))
  {
    out.belief.kernels = blocks.kernels;
    out.existence = 0.0;
    out.degenerate = true;
    return out;
  }
  out.existence = post.existence;

  WeightedKernelSet set;
  for (std::size_t h = 0; h < blocks.n_kernels(); ++h)
  {
    if (has_positive_weight(post.weights[h]))
    {
      GaussianKernel k = gaussian_representation(post.particles[h], post.weights[h]);
      if (covariance == KernelCovariance::Proposal)
      {
        if (auto cov = proposal_covariance(blocks, kappa, numerator, h))
        {
          k.cov = *cov;
        }
      }
      set.kernels.push_back(k);
    }
    else
    {
      set.kernels.push_back(blocks.kernels[h]);
    }
  }
  set.particles = std::move(post.particles);
  set.kernel_particle_weights = std::move(post.weights);
  Rng resample_rng = rng.split(0x7e5a3b1eULL);
  out.belief.kernels = resample_kernels(set, n_kernels_out, resample_rng);
  return out;
}

GmmBelief single_object_update(GmmBelief const& belief, std::vector<double> const& measurements,
                               ScalarModel const& model, DetectionParams const& detection,
                               EvaluationOptions const& options, Rng const& rng)
{
  EvaluationBlocks const blocks = evaluate_legacy(belief, 1.0, measurements, model, detection, options, rng.split(1));
  std::vector<double> const kappa(measurements.size() + 1, 1.0);
  LegacyUpdate update = update_legacy(blocks, kappa, belief.size(), rng.split(2));
  return std::move(update.belief);
}

}  // namespace pfmot
