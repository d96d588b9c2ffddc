#pragma once

#include "pfmot/core.hpp"
#include "pfmot/measurement_model.hpp"
#include "pfmot/mot_filter.hpp"
#include "pfmot/rng.hpp"

#include <cstdint>
#include <vector>

namespace pfmot
{

struct ObjectSchedule
{
  int birth = 1;
  int death = 1;
};

struct ScenarioConfig
{
  Box roi{{-1000.0, -1000.0, -1500.0}, {1000.0, 1000.0, 0.0}};
  std::vector<Position> array_centers{{519.0, 137.0, -1300.0}, {-519.0, -137.0, -1300.0}};
  /// Receiver positions relative to each array centre.
  std::vector<Position> receiver_offsets = tetrahedron_offsets(1.0);
  int n_steps = 200;
  std::vector<ObjectSchedule> objects;
  double circle_radius = 300.0;
  double start_depth = -50.0;
  double horizontal_speed = 1.0;
  double vertical_speed = -4.0;
  double period = 1.0;
  double sigma_w = 0.1;
  double sigma_v = 1e-6;
  double p_d = 0.85;
  double mu_fp = 10.0;
  double sound_speed = 1500.0;
  std::uint64_t seed = 0;

  /// Regular tetrahedron with the given edge length, centred at the origin.
  static std::vector<Position> tetrahedron_offsets(double edge);
  /// Eight objects over 200 steps.
  static ScenarioConfig paper_default();
  /// Same geometry and noise, two objects over 100 steps.
  static ScenarioConfig paper_scaled();
};

void validate(ScenarioConfig const& cfg);

/// Every within-array receiver pair, array by array, pairs in lexicographic order.
std::vector<Sensor> build_sensor_suite(ScenarioConfig const& cfg);

struct TruthTrack
{
  std::int64_t label = 0;
  int birth = 1;
  int death = 1;
  std::vector<StateVector> states;

  [[nodiscard]] bool alive(int step) const { return step >= birth && step <= death; }
  [[nodiscard]] StateVector const& at(int step) const { return states[static_cast<std::size_t>(step - birth)]; }
};

struct GroundTruth
{
  int n_steps = 0;
  std::vector<TruthTrack> objects;
  std::vector<std::string> warnings;

  [[nodiscard]] std::vector<Position> positions_at(int step) const;
};

inline constexpr std::int64_t kFalsePositiveOrigin = -1;

struct MeasurementBatch
{
  int sensor = 0;
  std::vector<double> values;
  std::vector<std::int64_t> origins;
};

/// Everything a tracker may see: sensor geometry, detection model and the batches.
struct MeasurementData
{
  std::vector<Sensor> sensors;
  DetectionParams detection;
  Box roi;
  double period = 1.0;
  /// steps[k - 1][s] is the batch of sensor s at step k.
  std::vector<std::vector<MeasurementBatch>> steps;
};

GroundTruth generate_truth(ScenarioConfig const& cfg, Rng const& rng);

std::vector<std::vector<MeasurementBatch>> generate_measurements(GroundTruth const& truth,
                                                                 std::vector<Sensor> const& sensors,
                                                                 ScenarioConfig const& cfg, Rng const& rng);

struct SimulationOutput
{
  GroundTruth truth;
  MeasurementData measurements;
};

SimulationOutput simulate(ScenarioConfig const& cfg, std::uint64_t seed);

}  // namespace pfmot
