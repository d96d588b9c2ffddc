#include "pfmot/scenario.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pfmot
{

namespace
{

constexpr std::uint64_t kTruthKey = 1;
constexpr std::uint64_t kMeasurementKey = 2;

}  // namespace

std::vector<Position> ScenarioConfig::tetrahedron_offsets(double edge)
{
  double const s = edge / (2.0 * std::numbers::sqrt2);
  return {{s, s, s}, {s, -s, -s}, {-s, s, -s}, {-s, -s, s}};
}

ScenarioConfig ScenarioConfig::paper_default()
{
  ScenarioConfig cfg;
  std::vector<int> const births{1, 10, 20, 30, 40, 50, 60, 70};
  std::vector<int> const deaths{130, 140, 150, 160, 170, 180, 190, 200};
  for (std::size_t j = 0; j < births.size(); ++j)
  {
    cfg.objects.push_back({births[j], deaths[j]});
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::paper_scaled()
{
  ScenarioConfig cfg;
  cfg.n_steps = 100;
  cfg.objects = {{1, 100}, {10, 100}};
  return cfg;
}

void validate(ScenarioConfig const& cfg)
{
  if (!((cfg.roi.hi.array() > cfg.roi.lo.array()).all()))
  {
    throw std::invalid_argument("scenario: empty region of interest");
  }
  if (cfg.n_steps < 0)
  {
    throw std::invalid_argument("scenario: negative step count");
  }
  if (cfg.array_centers.empty() || cfg.receiver_offsets.size() < 2)
  {
    throw std::invalid_argument("scenario: need at least one array with two receivers");
  }
  for (auto const& obj : cfg.objects)
  {
    if (obj.birth < 1 || obj.birth >= obj.death || obj.death > cfg.n_steps)
    {
      throw std::invalid_argument("scenario: object schedule needs 1 <= birth < death <= n_steps");
    }
  }
  if (!(cfg.sound_speed > 0.0) || !(cfg.sigma_v >= 0.0) || !(cfg.sigma_w >= 0.0) || !(cfg.period > 0.0))
  {
    throw std::invalid_argument("scenario: sound speed and period must be positive, noise levels nonnegative");
  }
  if (!(cfg.p_d >= 0.0 && cfg.p_d <= 1.0) || !(cfg.mu_fp >= 0.0))
  {
    throw std::invalid_argument("scenario: p_d outside [0, 1] or negative false-positive rate");
  }
  Position const start_lo{-cfg.circle_radius, -cfg.circle_radius, cfg.start_depth};
  Position const start_hi{cfg.circle_radius, cfg.circle_radius, cfg.start_depth};
  if (!cfg.objects.empty() && !(cfg.roi.contains(start_lo) && cfg.roi.contains(start_hi)))
  {
    throw std::invalid_argument("scenario: starting circle leaves the region of interest");
  }
}

std::vector<Sensor> build_sensor_suite(ScenarioConfig const& cfg)
{
  if (cfg.receiver_offsets.size() < 2)
  {
    throw std::invalid_argument("build_sensor_suite: need at least two receivers per array");
  }
  std::vector<Sensor> out;
  for (auto const& centre : cfg.array_centers)
  {
    for (std::size_t a = 0; a < cfg.receiver_offsets.size(); ++a)
    {
      for (std::size_t b = a + 1; b < cfg.receiver_offsets.size(); ++b)
      {
        Sensor sensor;
        sensor.receiver_a = centre + cfg.receiver_offsets[a];
        sensor.receiver_b = centre + cfg.receiver_offsets[b];
        sensor.sound_speed = cfg.sound_speed;
        sensor.noise_std = cfg.sigma_v;
        validate_sensor(sensor);
        out.push_back(sensor);
      }
    }
  }
  return out;
}

std::vector<Position> GroundTruth::positions_at(int step) const
{
  std::vector<Position> out;
  for (auto const& obj : objects)
  {
    if (obj.alive(step))
    {
      out.push_back(position_of(obj.at(step)));
    }
  }
  return out;
}

GroundTruth generate_truth(ScenarioConfig const& cfg, Rng const& rng)
{
  validate(cfg);
  MotionModel const motion = MotionModel::constant_velocity(cfg.period, cfg.sigma_w, 1.0);
  Eigen::LLT<Covariance> const q_llt(motion.Q);
  Covariance const q_root = cfg.sigma_w > 0.0 ? Covariance(q_llt.matrixL()) : Covariance::Zero();

  GroundTruth out;
  out.n_steps = cfg.n_steps;
  for (std::size_t j = 0; j < cfg.objects.size(); ++j)
  {
    Rng obj_rng = rng.split(j);
    TruthTrack track;
    track.label = static_cast<std::int64_t>(j);
    track.birth = cfg.objects[j].birth;
    track.death = cfg.objects[j].death;
    double const angle = obj_rng.uniform(0.0, 2.0 * std::numbers::pi);
    StateVector x;
    x << cfg.circle_radius * std::cos(angle), cfg.circle_radius * std::sin(angle), cfg.start_depth,
      -cfg.horizontal_speed * std::cos(angle), -cfg.horizontal_speed * std::sin(angle), cfg.vertical_speed;
    bool escaped = false;
    for (int k = track.birth; k <= track.death; ++k)
    {
      if (k > track.birth)
      {
        x = motion.G * x + q_root * obj_rng.standard_normal<kStateDim>();
      }
      if (!escaped && !cfg.roi.contains(position_of(x)))
      {
        escaped = true;
        out.warnings.push_back("object " + std::to_string(j) + " leaves the region of interest at step " +
                               std::to_string(k));
      }
      track.states.push_back(x);
    }
    out.objects.push_back(std::move(track));
  }
  return out;
}

std::vector<std::vector<MeasurementBatch>> generate_measurements(GroundTruth const& truth,
                                                                 std::vector<Sensor> const& sensors,
                                                                 ScenarioConfig const& cfg, Rng const& rng)
{
  std::vector<std::vector<MeasurementBatch>> out(static_cast<std::size_t>(truth.n_steps));
  for (int k = 1; k <= truth.n_steps; ++k)
  {
    auto& step = out[static_cast<std::size_t>(k - 1)];
    for (std::size_t s = 0; s < sensors.size(); ++s)
    {
      Rng sensor_rng = rng.split({static_cast<std::uint64_t>(k), s});
      Sensor const& sensor = sensors[s];
      FpDensity const fp = fp_density_uniform(sensor);
      std::vector<std::pair<double, std::int64_t>> values;
      for (auto const& obj : truth.objects)
      {
        if (!obj.alive(k) || !sensor_rng.bernoulli(cfg.p_d))
        {
          continue;
        }
        double const z = tdoa_predict(sensor, obj.at(k)) + sensor_rng.normal(0.0, sensor.noise_std);
        values.emplace_back(std::clamp(z, fp.support.lo, fp.support.hi), obj.label);
      }
      int const n_fp = sensor_rng.poisson(cfg.mu_fp);
      for (int i = 0; i < n_fp; ++i)
      {
        values.emplace_back(sensor_rng.uniform(fp.support.lo, fp.support.hi), kFalsePositiveOrigin);
      }
      std::shuffle(values.begin(), values.end(), sensor_rng.engine());
      MeasurementBatch batch;
      batch.sensor = static_cast<int>(s);
      for (auto const& [z, origin] : values)
      {
        batch.values.push_back(z);
        batch.origins.push_back(origin);
      }
      step.push_back(std::move(batch));
    }
  }
  return out;
}

SimulationOutput simulate(ScenarioConfig const& cfg, std::uint64_t seed)
{
  validate(cfg);
  Rng const rng(seed);
  SimulationOutput out;
  out.truth = generate_truth(cfg, rng.split(kTruthKey));
  out.measurements.sensors = build_sensor_suite(cfg);
  out.measurements.detection = {cfg.p_d, cfg.mu_fp};
  out.measurements.roi = cfg.roi;
  out.measurements.period = cfg.period;
  out.measurements.steps = generate_measurements(out.truth, out.measurements.sensors, cfg, rng.split(kMeasurementKey));
  return out;
}

}  // namespace pfmot
