// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero if any fails.
#include "pfmot/config.hpp"
#include "pfmot/harness.hpp"
#include "pfmot/mot_filter.hpp"
#include "pfmot/mou_association.hpp"
#include "pfmot/ospa.hpp"
#include "pfmot/particle_flow.hpp"
#include "da_oracle.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <thread>

using namespace pfmot;

namespace
{

using Z1 = ScalarModel::ZVector;

struct Outcome
{
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, std::string const& what)
  {
    if (!ok)
    {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::vector<StateVector> draw(MvnDensity<kStateDim> const& prior, std::size_t n, Rng& rng)
{
  std::vector<StateVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    out.push_back(prior.transform(rng.standard_normal<kStateDim>()));
  }
  return out;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

struct TdoaFlowCase
{
  TdoaModel model;
  StateVector mean;
  Covariance cov;
  Z1 z;
};

TdoaFlowCase random_tdoa_case(Rng& rng, std::vector<Sensor> const& sensors, ScenarioConfig const& cfg)
{
  auto const pick = static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(sensors.size()) - 1e-9));
  Sensor const& s = sensors[pick];
  StateVector mean;
  for (int axis = 0; axis < 3; ++axis)
  {
    mean(axis) = rng.uniform(cfg.roi.lo(axis) * 0.8, cfg.roi.hi(axis) * 0.8);
    mean(axis + 3) = rng.normal(0.0, 3.0);
  }
  Covariance cov = test::random_spd(rng);
  cov.topLeftCorner<3, 3>() *= rng.uniform(10.0, 2500.0);
  TdoaModel model(s);
  MvnDensity<kStateDim> const d(mean, cov);
  StateVector const truth = d.transform(rng.standard_normal<kStateDim>());
  Z1 const z = model.predict(truth) + Z1::Constant(rng.normal(0.0, s.noise_std));
  return {model, mean, cov, z};
}

// 1. Flow endpoint vs Kalman posterior.
void kalman_oracle(Outcome& out)
{
  std::size_t const n = 1000;
  double worst_se = 0.0;
  double worst_cov = 0.0;

  Rng rng(2024);
  MvnDensity<kStateDim> const prior(StateVector::Zero(), Covariance::Identity());
  FlowResult const scalar = particle_flow<1>(draw(prior, n, rng), StateVector::Zero(), Covariance::Identity(),
                                             Z1::Constant(1.0), test::coordinate_model(0, 1.0), lambda_schedule(20));
  test::Moments const ms = test::sample_moments(scalar.particles);
  worst_se = std::abs(ms.mean(0) - 0.5) / std::sqrt(0.5 / static_cast<double>(n));
  worst_cov = rel_err(ms.cov(0, 0), 0.5);

  Eigen::Matrix<double, 3, kStateDim> H = Eigen::Matrix<double, 3, kStateDim>::Zero();
  H.leftCols<3>().setIdentity();
  Eigen::Matrix3d const R = Eigen::Matrix3d::Identity();
  LinearModel<3> const model(H, R);
  for (int trial = 0; trial < 5; ++trial)
  {
    Covariance const P = test::random_spd(rng, 2.0);
    StateVector const m0 = test::random_state(rng);
    Eigen::Vector3d const z = H * m0 + Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
    auto const kf = test::kalman<3>(m0, P, H, R, z);
    FlowResult const r = particle_flow<3>(draw(MvnDensity<kStateDim>(m0, P), n, rng), m0, P, z, model,
                                          lambda_schedule(20));
    test::Moments const m = test::sample_moments(r.particles);
    for (int i = 0; i < kStateDim; ++i)
    {
      worst_se = std::max(worst_se, std::abs(m.mean(i) - kf.mean(i)) / std::sqrt(kf.cov(i, i) / static_cast<double>(n)));
    }
    worst_cov = std::max(worst_cov, (m.cov - kf.cov).norm() / kf.cov.norm());
  }
  // Covariance error is relative in the Frobenius norm; per-entry sampling noise at 10³ particles is ~5%.
  out.detail << "max mean error " << worst_se << " SE, max covariance error " << 100.0 * worst_cov << "%";
  out.require(worst_se <= 3.0, "mean within 3 SE");
  out.require(worst_cov <= 0.10, "covariance within 10%");
}

// 2. Mean unnormalized weight vs Gaussian evidence.
void evidence_oracle(Outcome& out)
{
  Rng rng(31);
  WeightedParticleSet const s = invertible_flow<1>(StateVector::Zero(), Covariance::Identity(), Z1::Constant(1.0),
                                                   test::coordinate_model(0, 1.0), 10000, lambda_schedule(20), rng);
  double const mean_w = std::accumulate(s.weights.begin(), s.weights.end(), 0.0) / static_cast<double>(s.weights.size());
  double const evidence = test::normal_pdf(1.0, 0.0, 2.0);
  out.detail << "mean weight " << mean_w << " vs evidence " << evidence;
  out.require(std::abs(evidence - std::exp(-0.25) / std::sqrt(4.0 * std::numbers::pi)) < 1e-15, "closed form N(1; 0, 2)");
  out.require(rel_err(mean_w, evidence) <= 0.05, "within 5%");
}

// 3. θ vs finite-difference Jacobian of the step-by-step migration.
void mapping_factor_check(Outcome& out)
{
  ScenarioConfig const cfg = ScenarioConfig::paper_default();
  auto const sensors = build_sensor_suite(cfg);
  Rng rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial)
  {
    TdoaFlowCase const c = random_tdoa_case(rng, sensors, cfg);
    FlowTrace const t = flow_trace<1>(c.mean, c.cov, c.z, c.model, lambda_schedule(20));
    StateVector const x0 = MvnDensity<kStateDim>(c.mean, c.cov).transform(rng.standard_normal<kStateDim>());
    Covariance J;
    for (int i = 0; i < kStateDim; ++i)
    {
      double const h = 1e-3 * std::max(1.0, std::abs(x0(i)));
      StateVector e = StateVector::Zero();
      e(i) = h;
      J.col(i) = (migrate_stepwise(t, x0 + e) - migrate_stepwise(t, x0 - e)) / (2.0 * h);
    }
    worst = std::max(worst, rel_err(mapping_factor(t), std::abs(J.determinant())));
  }
  FlowTrace const scalar = flow_trace<1>(StateVector::Zero(), Covariance::Identity(), Z1::Constant(1.0),
                                         test::coordinate_model(0, 1.0), lambda_schedule(20));
  double const theta = mapping_factor(scalar);
  out.detail << "max relative error vs FD determinant " << worst << ", scalar theta " << theta;
  out.require(worst <= 1e-3, "FD determinant within 1e-3");
  out.require(rel_err(theta, 1.0 / std::sqrt(2.0)) <= 0.02, "theta within 2% of 1/sqrt(2)");
}

// 4. Reverse migration recovers the starting particles.
void reversibility(Outcome& out)
{
  ScenarioConfig const cfg = ScenarioConfig::paper_default();
  auto const sensors = build_sensor_suite(cfg);
  Rng rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial)
  {
    TdoaFlowCase const c = random_tdoa_case(rng, sensors, cfg);
    FlowTrace const t = flow_trace<1>(c.mean, c.cov, c.z, c.model, lambda_schedule(20));
    StateVector const x0 = MvnDensity<kStateDim>(c.mean, c.cov).transform(rng.standard_normal<kStateDim>());
    StateVector const back = reverse_flow(t, migrate_stepwise(t, x0));
    worst = std::max(worst, (back - x0).norm() / x0.norm());
  }
  out.detail << "max relative reconstruction error " << worst;
  out.require(worst <= 1e-6, "within 1e-6");
}

std::vector<double> spa_marginal(AssocMessages const& msg, std::vector<double> const& beta, std::size_t j)
{
  std::vector<double> p(beta.size());
  for (std::size_t a = 0; a < beta.size(); ++a)
  {
    p[a] = beta[a] * msg.kappa[j][a];
  }
  double const total = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p)
  {
    v /= total;
  }
  return p;
}

struct DaInstance
{
  std::vector<std::vector<double>> beta;
  std::vector<double> xi;
};

DaInstance random_instance(Rng& rng, std::size_t J, std::size_t M)
{
  DaInstance d;
  for (std::size_t j = 0; j < J; ++j)
  {
    std::vector<double> b{rng.uniform(0.05, 1.0)};
    for (std::size_t m = 0; m < M; ++m)
    {
      b.push_back(rng.uniform(0.0, 3.0));
    }
    d.beta.push_back(b);
  }
  for (std::size_t m = 0; m < M; ++m)
  {
    d.xi.push_back(1.0 + rng.uniform(0.0, 4.0));
  }
  return d;
}

struct DaError
{
  double abs = 0.0;      ///< largest entry difference
  double entry = 0.0;    ///< largest entrywise relative difference
  double vector = 0.0;   ///< largest relative L2 difference of one marginal vector
};

DaError da_error(DaInstance const& d)
{
  AssocMessages const msg = spa_da(d.beta, d.xi, 1000, 1e-14);
  test::DaMarginals const exact = test::enumerate_da(d.beta, d.xi);
  DaError e;
  auto add = [&](std::vector<double> const& got, std::vector<double> const& want) {
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t a = 0; a < got.size(); ++a)
    {
      e.abs = std::max(e.abs, std::abs(got[a] - want[a]));
      e.entry = std::max(e.entry, rel_err(got[a], want[a]));
      diff += (got[a] - want[a]) * (got[a] - want[a]);
      norm += want[a] * want[a];
    }
    e.vector = std::max(e.vector, std::sqrt(diff / norm));
  };
  for (std::size_t j = 0; j < d.beta.size(); ++j)
  {
    add(spa_marginal(msg, d.beta[j], j), exact.legacy[j]);
  }
  for (std::size_t m = 0; m < d.xi.size(); ++m)
  {
    double const r = new_object_existence(d.xi[m], msg.iota[m]);
    add({r, 1.0 - r}, {exact.new_object[m], 1.0 - exact.new_object[m]});
  }
  return e;
}

// 5. SPA vs brute-force enumeration.
void da_exactness(Outcome& out)
{
  Rng rng(505);
  double tree = 0.0;
  for (int trial = 0; trial < 400; ++trial)
  {
    std::size_t const other = 1 + static_cast<std::size_t>(trial % 5);
    DaInstance const d = trial % 2 == 0 ? random_instance(rng, 1, other) : random_instance(rng, other, 1);
    tree = std::max(tree, da_error(d).abs);
  }
  DaError loopy;
  for (int trial = 0; trial < 1000; ++trial)
  {
    DaError const e = da_error(random_instance(rng, 2, 2));
    loopy.abs = std::max(loopy.abs, e.abs);
    loopy.entry = std::max(loopy.entry, e.entry);
    loopy.vector = std::max(loopy.vector, e.vector);
  }
  // A marginal is judged as a vector: entrywise relative error is dominated by
  // near-zero probabilities and reported for reference only.
  out.detail << "tree max abs error " << tree << "; loopy J=M=2 max relative error " << 100.0 * loopy.vector
             << "% (entrywise " << 100.0 * loopy.entry << "%, abs " << loopy.abs << ")";
  out.require(tree <= 1e-12, "tree cases within 1e-12");
  out.require(loopy.vector <= 0.15, "loopy cases within 15%");
}

// 6. Bernoulli consistency of the legacy update.
void bernoulli_consistency(Outcome& out)
{
  double const fp_density = 0.1;
  auto const model = test::coordinate_model(0, 1.0, fp_density);
  EvaluationOptions opts;
  double worst_missed = 0.0;
  for (double p : {0.0, 0.1, 0.5, 0.93, 1.0})
  {
    for (double p_d : {0.0, 0.3, 0.85, 1.0})
    {
      opts.n_particles = 50;
      EvaluationBlocks const b =
        evaluate_legacy(GmmBelief{std::vector<GaussianKernel>(2)}, p, {}, model, {p_d, 2.0}, opts, Rng(10));
      LegacyUpdate const u = update_legacy(b, {1.0}, 2, Rng(11));
      double const denom = p * (1 - p_d) + (1 - p);
      double const expected = denom > 0.0 ? p * (1 - p_d) / denom : 0.0;
      worst_missed = std::max(worst_missed, std::abs(u.existence - expected));
    }
  }

  double const z = 1.5;
  double const p = 0.6;
  DetectionParams const det{0.85, 2.0};
  double const clutter = det.mu_fp * fp_density;
  double const w_miss = p * (1 - det.p_d);
  double const w_det = p * det.p_d * test::normal_pdf(z, 0.0, 2.0) / clutter;
  double const r = w_det / (w_miss + w_det);
  double const mean = r * z / 2.0;
  double const var = (1 - r) * 1.0 + r * (0.5 + 0.25 * z * z) - mean * mean;
  double const existence = (w_miss + w_det) / (w_miss + w_det + (1 - p));

  opts.n_particles = 10000;
  EvaluationBlocks const b = evaluate_legacy(GmmBelief{std::vector<GaussianKernel>(1)}, p, {z}, model, det, opts, Rng(14));
  LegacyPosterior const post = legacy_posterior(b, {1.0, 1.0});
  test::Moments const m = test::weighted_moments(post.particles[0], post.weights[0]);
  double const e_mean = rel_err(m.mean(0), mean);
  double const e_var = rel_err(m.cov(0, 0), var);
  double const e_ex = rel_err(post.existence, existence);
  out.detail << "missed-detection max error " << worst_missed << "; mixture mean/var/existence errors " << 100.0 * e_mean
             << "% " << 100.0 * e_var << "% " << 100.0 * e_ex << "%";
  out.require(worst_missed <= 1e-12, "missed-detection existence within 1e-12");
  out.require(e_mean <= 0.05 && e_var <= 0.05 && e_ex <= 0.05, "mixture posterior within 5%");
}

double brute_ospa(std::vector<Position> x, std::vector<Position> y, double c)
{
  if (x.size() > y.size())
  {
    std::swap(x, y);
  }
  if (y.empty())
  {
    return 0.0;
  }
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do
  {
    double cost = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
      cost += std::min((x[i] - y[perm[i]]).norm(), c);
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return (best + c * static_cast<double>(y.size() - x.size())) / static_cast<double>(y.size());
}

// 7. OSPA.
void ospa_check(Outcome& out)
{
  Rng rng(707);
  auto set = [&](std::size_t n) {
    std::vector<Position> s;
    for (std::size_t i = 0; i < n; ++i)
    {
      s.push_back(40.0 * Position(rng.normal(), rng.normal(), rng.normal()));
    }
    return s;
  };
  auto const x = set(4);
  out.require(ospa(x, x, 50.0, 1.0) == 0.0, "identical sets");
  out.require(ospa(x, {}, 50.0, 1.0) == 50.0 && ospa({}, x, 50.0, 1.0) == 50.0, "empty vs nonempty");
  out.require(std::abs(ospa({Position::Zero()}, {Position(6.0, 8.0, 0.0)}, 50.0, 1.0) - 10.0) < 1e-14,
              "matched singletons");
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial)
  {
    auto const a = set(static_cast<std::size_t>(trial % 7));
    auto const b = set(static_cast<std::size_t>((trial / 7) % 7));
    worst = std::max(worst, std::abs(ospa(a, b, 50.0, 1.0) - brute_ospa(a, b, 50.0)));
  }
  out.detail << "max deviation from brute force " << worst;
  out.require(worst <= 1e-10, "brute force within 1e-10");
}

double window_mean(std::vector<double> const& v, std::size_t first_step, std::size_t last_step)
{
  double sum = 0.0;
  for (std::size_t k = first_step; k <= last_step; ++k)
  {
    sum += v[k - 1];
  }
  return sum / static_cast<double>(last_step - first_step + 1);
}

// 8. Scaled scenario: SPA-PF well below SPA-PM, SPA-PM near the cutoff.
void scaled_scenario(Outcome& out)
{
  ScenarioConfig const scenario = load_scenario("preset:paper-scaled");
  std::size_t const runs = 10;
  std::uint64_t const seed = 1;
  std::size_t const jobs = std::max(1U, std::thread::hardware_concurrency());
  auto run = [&](std::string const& preset) {
    auto const t0 = std::chrono::steady_clock::now();
    MonteCarloResult const r = monte_carlo(scenario, load_tracker(preset), runs, seed, jobs, {});
    double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << preset << ": " << secs << " s, " << r.failures.size() << " failed runs\n";
    out.require(r.failures.empty(), preset + " runs completed");
    return r.mean_ospa.size() >= 100 ? window_mean(r.mean_ospa, 30, 100) : 0.0;
  };
  double const pf = run("preset:pf-scaled");
  double const pm = run("preset:pm-scaled");
  out.detail << "mean OSPA steps 30-100: pf " << pf << ", pm " << pm << " (ratio " << pf / pm << ")";
  out.require(pf <= 0.6 * pm, "pf at most 60% of pm");
  out.require(pm >= 35.0, "pm at least 35");
}

std::string slurp(std::filesystem::path const& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Repeated mc invocations are byte-identical.
void determinism(Outcome& out)
{
  auto const dir = std::filesystem::temp_directory_path() / "pfmot_acceptance_mc";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  ScenarioConfig scenario = ScenarioConfig::paper_scaled();
  scenario.n_steps = 12;
  scenario.objects = {{1, 12}, {4, 12}};
  write_json_file((dir / "scenario.json").string(), to_json(scenario));
  for (std::string const sub : {"a", "b"})
  {
    std::string const cmd = std::string(PFMOT_CLI_PATH) + " mc --scenario " + (dir / "scenario.json").string() +
                            " --tracker preset:pf-scaled --runs 2 --seed 77 --jobs 2 --out-dir " +
                            (dir / sub).string() + " > /dev/null 2>&1";
    out.require(std::system(cmd.c_str()) == 0, "mc invocation " + sub + " succeeded");
  }
  for (std::string const file : {"ospa.csv", "tracks.csv", "ospa_runs.csv"})
  {
    std::string const a = slurp(dir / "a" / file);
    out.require(!a.empty(), file + " written");
    out.require(a == slurp(dir / "b" / file), file + " identical");
  }
  out.detail << "compared ospa.csv, tracks.csv, ospa_runs.csv";
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Acceptance checks"};
  std::string range = "1-9";
  app.add_option("--criteria", range, "Criterion range, e.g. 1-7 or 8");
  CLI11_PARSE(app, argc, argv);
  int first = 1;
  int last = 9;
  if (auto dash = range.find('-'); dash != std::string::npos)
  {
    first = std::stoi(range.substr(0, dash));
    last = std::stoi(range.substr(dash + 1));
  }
  else
  {
    first = last = std::stoi(range);
  }

  std::vector<std::pair<std::string, std::function<void(Outcome&)>>> const criteria{
    {"Kalman oracle (flow)", kalman_oracle},
    {"invertible-flow evidence", evidence_oracle},
    {"mapping factor", mapping_factor_check},
    {"flow reversibility", reversibility},
    {"DA exactness on trees", da_exactness},
    {"Bernoulli consistency", bernoulli_consistency},
    {"OSPA", ospa_check},
    {"scaled scenario", scaled_scenario},
    {"determinism", determinism},
  };

  bool all = true;
  for (int c = first; c <= last; ++c)
  {
    auto const& [name, fn] = criteria.at(static_cast<std::size_t>(c - 1));
    Outcome out;
    auto const t0 = std::chrono::steady_clock::now();
    try
    {
      fn(out);
    }
    catch (std::exception const& e)
    {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %d (%s): %s  %s  [%.1f s]\n", c, name.c_str(), out.pass ? "PASS" : "FAIL",
                out.detail.str().c_str(), secs);
    std::fflush(stdout);
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
