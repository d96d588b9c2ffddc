#pragma once

#include "pfmot/config.hpp"
#include "pfmot/mot_filter.hpp"
#include "pfmot/ospa.hpp"
#include "pfmot/scenario.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pfmot
{

struct OspaSettings
{
  double cutoff = 50.0;
  double order = 1.0;
};

/// Everything the filter needs, derived from a tracker config and the sensor description.
struct TrackerSetup
{
  TrackerSettings settings;
  MotionModel motion;
  BirthModel birth;
  std::vector<TdoaModel> models;
  std::vector<int> sensor_order;

  [[nodiscard]] std::vector<ScalarModel const*> model_pointers() const;
};

TrackerSetup make_setup(TrackerConfig const& cfg, MeasurementData const& meas);

struct StepResult
{
  int step = 0;
  std::vector<Estimate> estimates;
  double ospa = 0.0;
  double seconds = 0.0;
  std::size_t n_pos = 0;
};

struct RunResult
{
  std::uint64_t seed = 0;
  std::vector<StepResult> steps;
};

using StepCallback = std::function<void(StepResult const&)>;

/// Runs the filter over all steps. OSPA is computed when `truth` is given.
RunResult run_tracker(TrackerConfig const& cfg, MeasurementData const& meas, GroundTruth const* truth,
                      OspaSettings const& ospa_settings, std::uint64_t seed, StepCallback const& on_step = {});

struct MonteCarloResult
{
  std::vector<double> mean_ospa;
  std::vector<double> stderr_ospa;
  std::vector<RunResult> runs;
  std::vector<std::size_t> run_index;
  std::vector<std::pair<std::size_t, std::string>> failures;
};

/// Run i simulates and tracks with seed master_seed + i; results are combined in run order.
MonteCarloResult monte_carlo(ScenarioConfig const& scenario, TrackerConfig const& tracker, std::size_t n_runs,
                             std::uint64_t master_seed, std::size_t jobs, OspaSettings const& ospa_settings,
                             std::function<void(std::size_t, RunResult const&)> const& on_run = {});

struct TrackRow
{
  std::int64_t run = 0;
  int step = 0;
  Estimate estimate;
};

std::string format_double(double v);

void write_tracks_csv(std::string const& path, std::vector<TrackRow> const& rows);
std::vector<TrackRow> read_tracks_csv(std::string const& path);
std::vector<TrackRow> track_rows(RunResult const& run, std::int64_t run_id);

struct OspaRow
{
  int step = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
};

void write_ospa_csv(std::string const& path, std::vector<OspaRow> const& rows);
std::vector<OspaRow> ospa_rows(std::vector<double> const& mean, std::vector<double> const& stderr_);

/// Per-step mean OSPA over the runs present in `rows` (run 0 when there are none).
std::vector<OspaRow> evaluate_tracks(GroundTruth const& truth, std::vector<TrackRow> const& rows,
                                     OspaSettings const& settings);

}  // namespace pfmot
