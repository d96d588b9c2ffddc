#include "pfmot/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace pfmot
{

namespace
{

constexpr std::uint64_t kTrackerStreamKey = 0x7ac4ULL;

void mean_and_stderr(std::vector<std::vector<double> const*> const& columns, std::vector<double>& mean,
                     std::vector<double>& err)
{
  std::size_t const n_steps = columns.empty() ? 0 : columns.front()->size();
  mean.assign(n_steps, 0.0);
  err.assign(n_steps, 0.0);
  double const n = static_cast<double>(columns.size());
  for (std::size_t k = 0; k < n_steps; ++k)
  {
    double sum = 0.0;
    for (auto const* col : columns)
    {
      sum += (*col)[k];
    }
    mean[k] = sum / n;
    if (columns.size() > 1)
    {
      double ss = 0.0;
      for (auto const* col : columns)
      {
        ss += ((*col)[k] - mean[k]) * ((*col)[k] - mean[k]);
      }
      err[k] = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
  }
}

std::vector<std::string> split_csv_line(std::string const& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
  {
    out.push_back(cell);
  }
  return out;
}

double parse_double(std::string const& s)
{
  double v = 0.0;
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
  {
    throw ConfigError("tracks csv: cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<ScalarModel const*> TrackerSetup::model_pointers() const
{
  std::vector<ScalarModel const*> out;
  out.reserve(models.size());
  for (auto const& m : models)
  {
    out.push_back(&m);
  }
  return out;
}

TrackerSetup make_setup(TrackerConfig const& cfg, MeasurementData const& meas)
{
  validate(cfg);
  TrackerSetup setup;
  TrackerSettings& s = setup.settings;
  s.detection = meas.detection;
  if (cfg.p_d)
  {
    s.detection.p_d = *cfg.p_d;
  }
  if (cfg.mu_fp)
  {
    s.detection.mu_fp = *cfg.mu_fp;
  }
  if (!(s.detection.mu_fp > 0.0))
  {
    throw ConfigError("tracker: the false-positive rate must be positive");
  }
  s.n_kernels = cfg.n_kernels;
  s.n_particles_new = cfg.n_particles_new;
  s.n_particles_legacy = cfg.n_particles_legacy;
  ProposalOptions base;
  base.schedule = lambda_schedule(cfg.n_lambda, cfg.lambda_ratio);
  base.ut = cfg.ut;
  s.new_proposal = base;
  s.legacy_proposal = base;
  switch (cfg.method)
  {
    case Method::Pf:
      s.new_proposal.kind = ProposalKind::Flow;
      s.legacy_proposal.kind = ProposalKind::Flow;
      break;
    case Method::Pm:
      s.new_proposal.kind = ProposalKind::Prior;
      s.legacy_proposal.kind = ProposalKind::Prior;
      break;
    case Method::Ut:
      s.new_proposal.kind = ProposalKind::Unscented;
      s.legacy_proposal.kind = ProposalKind::Unscented;
      break;
    case Method::PfHyb:
      s.new_proposal.kind = ProposalKind::Flow;
      s.legacy_proposal.kind = ProposalKind::Prior;
      break;
  }
  s.gate = cfg.gate;
  s.p_th = cfg.p_th;
  s.p_pr = cfg.p_pr;
  s.spa_max_iters = cfg.spa_max_iters;
  s.spa_tol = cfg.spa_tol;
  s.numerator = cfg.update_numerator;
  s.kernel_covariance = cfg.kernel_covariance;

  setup.motion = MotionModel::constant_velocity(cfg.period.value_or(meas.period), cfg.sigma_w, cfg.p_survival);
  setup.birth = BirthModel::from_roi(meas.roi, cfg.mean_births, cfg.birth_velocity_std, cfg.birth_cov_shrink);
  for (auto const& sensor : meas.sensors)
  {
    setup.models.emplace_back(sensor);
  }
  if (cfg.sensor_order.empty())
  {
    for (std::size_t i = 0; i < meas.sensors.size(); ++i)
    {
      setup.sensor_order.push_back(static_cast<int>(i));
    }
  }
  else
  {
    std::set<int> seen;
    for (int s_idx : cfg.sensor_order)
    {
      if (s_idx < 0 || static_cast<std::size_t>(s_idx) >= meas.sensors.size() || !seen.insert(s_idx).second)
      {
        throw ConfigError("tracker.sensor_order: unknown or repeated sensor index");
      }
    }
    setup.sensor_order = cfg.sensor_order;
  }
  return setup;
}

RunResult run_tracker(TrackerConfig const& cfg, MeasurementData const& meas, GroundTruth const* truth,
                      OspaSettings const& ospa_settings, std::uint64_t seed, StepCallback const& on_step)
{
  TrackerSetup const setup = make_setup(cfg, meas);
  auto const models = setup.model_pointers();
  Rng const rng = Rng(seed).split(kTrackerStreamKey);
  RunResult result;
  result.seed = seed;
  TrackerState state;
  for (std::size_t k = 0; k < meas.steps.size(); ++k)
  {
    auto const started = std::chrono::steady_clock::now();
    int const step = static_cast<int>(k) + 1;
    std::vector<SensorBatch> batches;
    for (int s : setup.sensor_order)
    {
      SensorBatch batch{s, {}};
      for (auto const& b : meas.steps[k])
      {
        if (b.sensor == s)
        {
          batch.values.insert(batch.values.end(), b.values.begin(), b.values.end());
        }
      }
      batches.push_back(std::move(batch));
    }
    try
    {
      state = multisensor_step(state, batches, setup.motion, models, setup.settings, setup.birth,
                               rng.split(static_cast<std::uint64_t>(step)));
    }
    catch (NumericError const& e)
    {
      throw NumericError(e.kind(), "step " + std::to_string(step) + ", " + e.what());
    }
    StepResult out;
    out.step = step;
    out.estimates = extract_estimates(state, setup.settings.p_th);
    out.n_pos = state.pos.size();
    if (truth != nullptr)
    {
      std::vector<Position> estimated;
      for (auto const& e : out.estimates)
      {
        estimated.push_back(position_of(e.state));
      }
      out.ospa = ospa(estimated, truth->positions_at(step), ospa_settings.cutoff, ospa_settings.order);
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (on_step)
    {
      on_step(out);
    }
    result.steps.push_back(std::move(out));
  }
  return result;
}

MonteCarloResult monte_carlo(ScenarioConfig const& scenario, TrackerConfig const& tracker, std::size_t n_runs,
                             std::uint64_t master_seed, std::size_t jobs, OspaSettings const& ospa_settings,
                             std::function<void(std::size_t, RunResult const&)> const& on_run)
{
  if (n_runs == 0)
  {
    throw ConfigError("monte carlo: at least one run is required");
  }
  validate(tracker);
  try
  {
    validate(scenario);
  }
  catch (std::invalid_argument const& e)
  {
    throw ConfigError(e.what());
  }
  std::vector<std::optional<RunResult>> results(n_runs);
  std::vector<std::string> errors(n_runs);
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < n_runs; i = next++)
    {
      std::uint64_t const seed = master_seed + i;
      try
      {
        SimulationOutput const sim = simulate(scenario, seed);
        results[i] = run_tracker(tracker, sim.measurements, &sim.truth, ospa_settings, seed);
        if (on_run)
        {
          std::lock_guard<std::mutex> lock(callback_mutex);
          on_run(i, *results[i]);
        }
      }
      catch (std::exception const& e)
      {
        errors[i] = e.what();
      }
    }
  };
  std::size_t const n_threads = std::max<std::size_t>(1, std::min(jobs, n_runs));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t)
  {
    threads.emplace_back(worker);
  }
  worker();
  for (auto& t : threads)
  {
    t.join();
  }

  MonteCarloResult out;
  std::vector<std::vector<double>> columns;
  for (std::size_t i = 0; i < n_runs; ++i)
  {
    if (!results[i])
    {
      out.failures.emplace_back(i, errors[i]);
      continue;
    }
    std::vector<double> col;
    for (auto const& s : results[i]->steps)
    {
      col.push_back(s.ospa);
    }
    columns.push_back(std::move(col));
    out.runs.push_back(std::move(*results[i]));
    out.run_index.push_back(i);
  }
  std::vector<std::vector<double> const*> ptrs;
  for (auto const& c : columns)
  {
    ptrs.push_back(&c);
  }
  mean_and_stderr(ptrs, out.mean_ospa, out.stderr_ospa);
  return out;
}

std::string format_double(double v)
{
  char buf[64];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{})
  {
    throw std::runtime_error("format_double: conversion failed");
  }
  return {buf, ptr};
}

std::vector<TrackRow> track_rows(RunResult const& run, std::int64_t run_id)
{
  std::vector<TrackRow> rows;
  for (auto const& s : run.steps)
  {
    for (auto const& e : s.estimates)
    {
      rows.push_back({run_id, s.step, e});
    }
  }
  return rows;
}

void write_tracks_csv(std::string const& path, std::vector<TrackRow> const& rows)
{
  std::ofstream out(path);
  if (!out)
  {
    throw ConfigError("cannot write '" + path + "'");
  }
  out << "run,step,label,x,y,z,vx,vy,vz,existence\n";
  for (auto const& r : rows)
  {
    out << r.run << ',' << r.step << ',' << r.estimate.label;
    for (int i = 0; i < kStateDim; ++i)
    {
      out << ',' << format_double(r.estimate.state(i));
    }
    out << ',' << format_double(r.estimate.existence) << '\n';
  }
}

std::vector<TrackRow> read_tracks_csv(std::string const& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line) || line != "run,step,label,x,y,z,vx,vy,vz,existence")
  {
    throw ConfigError("tracks csv: unexpected header in '" + path + "'");
  }
  std::vector<TrackRow> rows;
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    auto const cells = split_csv_line(line);
    if (cells.size() != 10)
    {
      throw ConfigError("tracks csv: expected 10 columns");
    }
    TrackRow r;
    try
    {
      r.run = std::stoll(cells[0]);
      r.step = std::stoi(cells[1]);
      r.estimate.label = std::stoll(cells[2]);
    }
    catch (std::exception const&)
    {
      throw ConfigError("tracks csv: cannot parse run, step or label");
    }
    for (int i = 0; i < kStateDim; ++i)
    {
      r.estimate.state(i) = parse_double(cells[static_cast<std::size_t>(3 + i)]);
    }
    r.estimate.existence = parse_double(cells[9]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<OspaRow> ospa_rows(std::vector<double> const& mean, std::vector<double> const& stderr_)
{
  std::vector<OspaRow> rows;
  for (std::size_t k = 0; k < mean.size(); ++k)
  {
    rows.push_back({static_cast<int>(k) + 1, mean[k], stderr_[k]});
  }
  return rows;
}

void write_ospa_csv(std::string const& path, std::vector<OspaRow> const& rows)
{
  std::ofstream out(path);
  if (!out)
  {
    throw ConfigError("cannot write '" + path + "'");
  }
  out << "step,mean_ospa,stderr\n";
  for (auto const& r : rows)
  {
    out << r.step << ',' << format_double(r.mean) << ',' << format_double(r.stderr_) << '\n';
  }
}

std::vector<OspaRow> evaluate_tracks(GroundTruth const& truth, std::vector<TrackRow> const& rows,
                                     OspaSettings const& settings)
{
  std::set<std::int64_t> runs;
  std::map<std::pair<std::int64_t, int>, std::vector<Position>> estimated;
  for (auto const& r : rows)
  {
    runs.insert(r.run);
    estimated[{r.run, r.step}].push_back(position_of(r.estimate.state));
  }
  if (runs.empty())
  {
    runs.insert(0);
  }
  std::vector<std::vector<double>> columns;
  for (std::int64_t run : runs)
  {
    std::vector<double> col;
    for (int k = 1; k <= truth.n_steps; ++k)
    {
      auto const it = estimated.find({run, k});
      std::vector<Position> const empty;
      col.push_back(ospa(it == estimated.end() ? empty : it->second, truth.positions_at(k), settings.cutoff,
                         settings.order));
    }
    columns.push_back(std::move(col));
  }
  std::vector<std::vector<double> const*> ptrs;
  for (auto const& c : columns)
  {
    ptrs.push_back(&c);
  }
  std::vector<double> mean;
  std::vector<double> err;
  mean_and_stderr(ptrs, mean, err);
  return ospa_rows(mean, err);
}

}  // namespace pfmot
