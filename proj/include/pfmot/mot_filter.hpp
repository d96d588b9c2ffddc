#pragma once

#include "pfmot/core.hpp"
#include "pfmot/measurement_model.hpp"
#include "pfmot/mou_association.hpp"
#include "pfmot/proposal.hpp"
#include "pfmot/rng.hpp"

#include <cstdint>
#include <vector>

namespace pfmot
{

struct MotionModel
{
  Covariance G = Covariance::Identity();
  StateVector u_mean = StateVector::Zero();
  Covariance Q = Covariance::Zero();
  double p_survival = 0.95;

  /// Per-axis constant velocity with white-noise acceleration of std sigma_w.
  static MotionModel constant_velocity(double period, double sigma_w, double p_survival);
};

struct Box
{
  Position lo = Position::Zero();
  Position hi = Position::Ones();

  [[nodiscard]] bool contains(Position const& p) const
  {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

struct BirthModel
{
  Box roi;
  double mean_births = 0.05;
  double velocity_prior_std = 5.0;
  Covariance kernel_cov = Covariance::Identity();

  /// Kernel covariance equal to the covariance of the uniform position prior and the
  /// velocity prior, optionally scaled by `shrink`.
  static BirthModel from_roi(Box const& roi, double mean_births, double velocity_prior_std, double shrink = 1.0);
};

struct TrackerSettings
{
  DetectionParams detection;
  std::size_t n_kernels = 100;
  std::size_t n_particles_new = 500;
  std::size_t n_particles_legacy = 30;
  ProposalOptions new_proposal;
  ProposalOptions legacy_proposal;
  GateOptions gate;
  double p_th = 0.5;
  double p_pr = 1e-4;
  int spa_max_iters = 200;
  double spa_tol = 1e-6;
  UpdateNumerator numerator = UpdateNumerator::KappaWeighted;
  KernelCovariance kernel_covariance = KernelCovariance::Particles;
};

struct TrackerState
{
  std::vector<PotentialObject> pos;
  std::int64_t label_counter = 0;
  int step = 0;
};

TrackerState predict(TrackerState const& state, MotionModel const& motion);

struct NewObject
{
  GmmBelief belief;
  double xi = 1.0;
};

std::vector<NewObject> new_objects(std::vector<double> const& measurements, BirthModel const& birth,
                                   ScalarModel const& model, DetectionParams const& detection,
                                   std::size_t n_particles, std::size_t n_kernels, ProposalOptions const& proposal,
                                   Rng const& rng);

double new_object_existence(double xi, double iota);

struct SensorBatch
{
  int sensor = 0;
  std::vector<double> values;
};

/// Diagnostics of one sensor update.
struct UpdateStats
{
  std::size_t legacy = 0;
  std::size_t born = 0;
  bool spa_converged = true;
  std::vector<std::vector<double>> beta;
  std::vector<double> xi;
};

TrackerState single_sensor_update(TrackerState const& state, SensorBatch const& batch, ScalarModel const& model,
                                  TrackerSettings const& settings, BirthModel const& birth, Rng const& rng,
                                  UpdateStats* stats = nullptr);

TrackerState prune(TrackerState const& state, double threshold);

/// Predict once, then update and prune sensor by sensor in the order of `batches`.
/// `models[s]` is the model of sensor index s; its update draws from rng.split(s + 1).
TrackerState multisensor_step(TrackerState const& state, std::vector<SensorBatch> const& batches,
                              MotionModel const& motion, std::vector<ScalarModel const*> const& models,
                              TrackerSettings const& settings, BirthModel const& birth, Rng const& rng);

std::vector<Estimate> extract_estimates(TrackerState const& state, double threshold);

}  // namespace pfmot
