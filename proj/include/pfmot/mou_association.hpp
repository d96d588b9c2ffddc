#pragma once

#include "pfmot/core.hpp"
#include "pfmot/gmm_flow.hpp"
#include "pfmot/measurement_model.hpp"
#include "pfmot/proposal.hpp"
#include "pfmot/rng.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pfmot
{

struct DetectionParams
{
  double p_d = 0.85;
  double mu_fp = 10.0;
};

/// Rectangular gate |z - h(mean)| <= g * sqrt(H P Hᵀ + R); a measurement is kept if any kernel admits it.
struct GateOptions
{
  bool enabled = false;
  double g = 5.0;
};

struct EvaluationOptions
{
  std::size_t n_particles = 30;
  ProposalOptions proposal;
  GateOptions gate;
};

/// Particles of one (kernel, hypothesis) pair. Only entries with nonzero mass are kept:
/// mass is the importance weight ω for the missed-detection hypothesis and l(z|x)·ω for
/// a measurement hypothesis. ω already contains the factor p/N_p.
struct HypothesisBlock
{
  ParticleCloud particles;
  std::vector<std::uint32_t> index;
  std::vector<double> mass;
  /// Covariance of the proposal Gaussian for moved blocks.
  std::optional<Covariance> cov;
  bool moved = false;
  bool fallback = false;
};

struct EvaluationBlocks
{
  std::size_t n_particles = 0;
  double existence = 0.0;
  DetectionParams detection;
  std::vector<GaussianKernel> kernels;
  std::vector<double> measurements;
  std::vector<double> clutter;
  std::vector<bool> gated_in;
  std::vector<std::vector<HypothesisBlock>> blocks;
  std::vector<double> beta;

  [[nodiscard]] std::size_t n_kernels() const { return kernels.size(); }
  [[nodiscard]] std::size_t n_measurements() const { return measurements.size(); }
};

/// Association messages. kappa[j][0] = 1; iota[m] feeds the new-object existence.
struct AssocMessages
{
  std::vector<std::vector<double>> kappa;
  std::vector<double> iota;
  std::vector<std::vector<double>> phi;
  int iterations = 0;
  bool converged = true;
};

enum class UpdateNumerator
{
  KappaWeighted,
  Plain,
};

/// Source of the per-kernel covariance after a legacy update.
///  Particles: weighted sample covariance of the kernel's posterior particles
///  Proposal:  moment match of the hypothesis Gaussians (prior covariance for a missed
///             detection, proposal covariance for a measurement), falling back to the
///             particles when a hypothesis has no proposal covariance
enum class KernelCovariance
{
  Particles,
  Proposal,
};

double missed_detection_beta(double existence, double p_d);

EvaluationBlocks evaluate_legacy(GmmBelief const& belief, double existence, std::vector<double> const& measurements,
                                 ScalarModel const& model, DetectionParams const& detection,
                                 EvaluationOptions const& options, Rng const& rng);

AssocMessages spa_da(std::vector<std::vector<double>> const& beta_legacy, std::vector<double> const& xi_new,
                     int max_iters = 200, double tol = 1e-6);

/// Posterior particles of a legacy object pooled per kernel, before resampling.
struct LegacyPosterior
{
  std::vector<std::vector<StateVector>> particles;
  std::vector<std::vector<double>> weights;
  double total_mass = 0.0;
  double existence = 0.0;
};

LegacyPosterior legacy_posterior(EvaluationBlocks const& blocks, std::vector<double> const& kappa,
                                 UpdateNumerator numerator = UpdateNumerator::KappaWeighted);

struct LegacyUpdate
{
  GmmBelief belief;
  double existence = 0.0;
  bool degenerate = false;
};

LegacyUpdate update_legacy(EvaluationBlocks const& blocks, std::vector<double> const& kappa,
                           std::size_t n_kernels_out, Rng const& rng,
                           UpdateNumerator numerator = UpdateNumerator::KappaWeighted,
                           KernelCovariance covariance = KernelCovariance::Particles);

/// Update of an object known to exist, with every association hypothesis weighted by its evidence.
GmmBelief single_object_update(GmmBelief const& belief, std::vector<double> const& measurements,
                               ScalarModel const& model, DetectionParams const& detection,
                               EvaluationOptions const& options, Rng const& rng);

}  // namespace pfmot
