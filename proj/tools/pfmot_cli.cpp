#include "pfmot/config.hpp"
#include "pfmot/harness.hpp"
#include "pfmot/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace
{

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

std::filesystem::path prepare_dir(std::string const& dir)
{
  std::filesystem::path const path(dir);
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec)
  {
    throw pfmot::ConfigError("cannot create directory '" + dir + "': " + ec.message());
  }
  return path;
}

int cmd_simulate(std::string const& scenario_source, std::uint64_t seed, std::string const& out_dir)
{
  pfmot::ScenarioConfig const cfg = pfmot::load_scenario(scenario_source);
  pfmot::SimulationOutput const sim = pfmot::simulate(cfg, seed);
  for (auto const& w : sim.truth.warnings)
  {
    std::cerr << "warning: " << w << '\n';
  }
  auto const dir = prepare_dir(out_dir);
  pfmot::write_json_file((dir / "truth.json").string(), pfmot::truth_to_json(sim.truth));
  pfmot::write_json_file((dir / "meas.json").string(), pfmot::measurements_to_json(sim.measurements));
  return 0;
}

int cmd_track(std::string const& tracker_source, std::string const& meas_path, std::string const& out,
              std::optional<std::uint64_t> seed, bool verbose)
{
  pfmot::TrackerConfig const cfg = pfmot::load_tracker(tracker_source);
  pfmot::MeasurementData const meas = pfmot::measurements_from_json(pfmot::load_json_file(meas_path));
  pfmot::StepCallback progress;
  if (verbose)
  {
    progress = [](pfmot::StepResult const& s) {
      std::cerr << "step " << s.step << ": " << s.estimates.size() << " tracks, " << s.n_pos << " objects, "
                << s.seconds << " s\n";
    };
  }
  pfmot::RunResult const run = pfmot::run_tracker(cfg, meas, nullptr, {}, seed.value_or(cfg.seed), progress);
  pfmot::write_tracks_csv(out, pfmot::track_rows(run, 0));
  return 0;
}

int cmd_evaluate(std::string const& truth_path, std::string const& tracks_path, double cutoff, double order,
                 std::string const& out)
{
  pfmot::GroundTruth const truth = pfmot::truth_from_json(pfmot::load_json_file(truth_path));
  auto const rows = pfmot::read_tracks_csv(tracks_path);
  pfmot::write_ospa_csv(out, pfmot::evaluate_tracks(truth, rows, {cutoff, order}));
  return 0;
}

int cmd_mc(std::string const& scenario_source, std::string const& tracker_source, std::size_t runs, std::uint64_t seed,
           std::size_t jobs, std::string const& out_dir, double cutoff, double order, bool verbose)
{
  pfmot::ScenarioConfig const scenario = pfmot::load_scenario(scenario_source);
  pfmot::TrackerConfig const tracker = pfmot::load_tracker(tracker_source);
  auto const dir = prepare_dir(out_dir);
  std::function<void(std::size_t, pfmot::RunResult const&)> progress;
  if (verbose)
  {
    progress = [](std::size_t i, pfmot::RunResult const& r) {
      double seconds = 0.0;
      for (auto const& s : r.steps)
      {
        seconds += s.seconds;
      }
      std::cerr << "run " << i << " done in " << seconds << " s\n";
    };
  }
  pfmot::MonteCarloResult const result =
    pfmot::monte_carlo(scenario, tracker, runs, seed, jobs, {cutoff, order}, progress);

  if (!result.runs.empty())
  {
    pfmot::write_ospa_csv((dir / "ospa.csv").string(), pfmot::ospa_rows(result.mean_ospa, result.stderr_ospa));
  }
  std::vector<pfmot::TrackRow> rows;
  std::ofstream per_run(dir / "ospa_runs.csv");
  per_run << "run,step,ospa\n";
  nlohmann::json timing = nlohmann::json::array();
  for (std::size_t r = 0; r < result.runs.size(); ++r)
  {
    auto const run_id = static_cast<std::int64_t>(result.run_index[r]);
    auto const run_rows = pfmot::track_rows(result.runs[r], run_id);
    rows.insert(rows.end(), run_rows.begin(), run_rows.end());
    double seconds = 0.0;
    for (auto const& s : result.runs[r].steps)
    {
      per_run << run_id << ',' << s.step << ',' << pfmot::format_double(s.ospa) << '\n';
      seconds += s.seconds;
    }
    timing.push_back({{"run", run_id}, {"seconds", seconds}});
  }
  pfmot::write_tracks_csv((dir / "tracks.csv").string(), rows);
  pfmot::write_json_file((dir / "timing.json").string(), timing);
  for (auto const& [i, what] : result.failures)
  {
    std::cerr << "run " << i << " failed: " << what << '\n';
  }
  return result.failures.empty() ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Multisensor multiobject tracking with Gaussian-mixture particle flow"};
  app.require_subcommand(1);

  std::string scenario = "preset:paper-default";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  auto* simulate = app.add_subcommand("simulate", "Generate ground truth and TDOA measurements");
  simulate->add_option("--scenario", scenario, "Scenario JSON file or preset:paper-default|preset:paper-scaled");
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--out-dir", out_dir, "Output directory for truth.json and meas.json");

  std::string tracker = "preset:pf";
  std::string meas_path;
  std::string out = "tracks.csv";
  std::optional<std::uint64_t> track_seed;
  bool verbose = false;
  auto* track = app.add_subcommand("track", "Run a tracker over a measurement file");
  track->add_option("--tracker", tracker, "Tracker JSON file or preset:<pf|pm|ut|pf_hyb>[-scaled]");
  track->add_option("--meas", meas_path, "Measurement file")->required();
  track->add_option("--out", out, "Output tracks CSV");
  track->add_option("--seed", track_seed, "Override the tracker seed");
  track->add_flag("-v,--verbose", verbose, "Report progress per step");

  std::string truth_path;
  std::string tracks_path;
  double cutoff = 50.0;
  double order = 1.0;
  std::string ospa_out = "ospa.csv";
  auto* evaluate = app.add_subcommand("evaluate", "Compute OSPA of tracks against ground truth");
  evaluate->add_option("--truth", truth_path, "Ground truth file")->required();
  evaluate->add_option("--tracks", tracks_path, "Tracks CSV")->required();
  evaluate->add_option("--cutoff", cutoff, "OSPA cutoff");
  evaluate->add_option("--order", order, "OSPA order");
  evaluate->add_option("--out", ospa_out, "Output OSPA CSV");

  std::size_t runs = 1;
  std::size_t jobs = 1;
  auto* mc = app.add_subcommand("mc", "Monte Carlo evaluation");
  mc->add_option("--scenario", scenario, "Scenario JSON file or preset");
  mc->add_option("--tracker", tracker, "Tracker JSON file or preset");
  mc->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  mc->add_option("--seed", seed, "Master seed; run i uses seed + i");
  mc->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  mc->add_option("--out-dir", out_dir, "Output directory");
  mc->add_option("--cutoff", cutoff, "OSPA cutoff");
  mc->add_option("--order", order, "OSPA order");
  mc->add_flag("-v,--verbose", verbose, "Report progress per run");

  try
  {
    app.parse(argc, argv);
  }
  catch (CLI::ParseError const& e)
  {
    int const code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try
  {
    if (*simulate)
    {
      return cmd_simulate(scenario, seed, out_dir);
    }
    if (*track)
    {
      return cmd_track(tracker, meas_path, out, track_seed, verbose);
    }
    if (*evaluate)
    {
      return cmd_evaluate(truth_path, tracks_path, cutoff, order, ospa_out);
    }
    if (*mc)
    {
      return cmd_mc(scenario, tracker, runs, seed, jobs, out_dir, cutoff, order, verbose);
    }
  }
  catch (pfmot::ConfigError const& e)
  {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (std::invalid_argument const& e)
  {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  catch (pfmot::NumericError const& e)
  {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  catch (std::exception const& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
