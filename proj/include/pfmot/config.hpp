#pragma once

#include "pfmot/mot_filter.hpp"
#include "pfmot/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfmot
{

/// Invalid or unreadable configuration/input file.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class Method
{
  Pf,
  Pm,
  Ut,
  PfHyb,
};

std::string to_string(Method method);
Method method_from_string(std::string const& name);

struct TrackerConfig
{
  Method method = Method::Pf;
  std::size_t n_kernels = 100;
  std::size_t n_particles_new = 500;
  std::size_t n_particles_legacy = 30;
  int n_lambda = 20;
  double lambda_ratio = 1.2;
  double p_th = 0.5;
  double p_pr = 1e-4;
  GateOptions gate;
  UtParams ut;
  UpdateNumerator update_numerator = UpdateNumerator::KappaWeighted;
  KernelCovariance kernel_covariance = KernelCovariance::Particles;
  int spa_max_iters = 200;
  double spa_tol = 1e-6;
  double sigma_w = 0.1;
  double p_survival = 0.95;
  /// Taken from the measurement file when unset.
  std::optional<double> period;
  double mean_births = 0.05;
  double birth_velocity_std = 5.0;
  double birth_cov_shrink = 1.0;
  /// Override the detection model stored with the measurements.
  std::optional<double> p_d;
  std::optional<double> mu_fp;
  /// Sensor processing order; ascending index when empty.
  std::vector<int> sensor_order;
  std::uint64_t seed = 0;
};

/// Defaults of a method: 10000/600 particles (new/legacy) for the prior proposal and
/// 500/30 for flow and unscented proposals; the hybrid uses 500 new and 600 legacy.
TrackerConfig tracker_defaults(Method method);

void validate(TrackerConfig const& cfg);

nlohmann::json load_json_file(std::string const& path);
void write_json_file(std::string const& path, nlohmann::json const& doc);

TrackerConfig tracker_config_from_json(nlohmann::json const& doc);
nlohmann::json to_json(TrackerConfig const& cfg);

/// A scenario document may name a "preset" that the remaining keys override.
ScenarioConfig scenario_config_from_json(nlohmann::json const& doc);
nlohmann::json to_json(ScenarioConfig const& cfg);
/// "preset:<name>" or a path to a JSON file.
ScenarioConfig load_scenario(std::string const& source);
TrackerConfig load_tracker(std::string const& source);

inline constexpr int kFormatVersion = 1;

nlohmann::json truth_to_json(GroundTruth const& truth);
GroundTruth truth_from_json(nlohmann::json const& doc);
nlohmann::json measurements_to_json(MeasurementData const& data);
MeasurementData measurements_from_json(nlohmann::json const& doc);

}  // namespace pfmot
