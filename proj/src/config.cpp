#include "pfmot/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string_view>

namespace pfmot
{

using nlohmann::json;

namespace
{

void check_keys(json const& obj, std::initializer_list<std::string_view> allowed, std::string const& where)
{
  if (!obj.is_object())
  {
    throw ConfigError(where + ": expected an object");
  }
  for (auto const& item : obj.items())
  {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
    {
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

template <class T>
void read(json const& obj, char const* key, T& out, std::string const& where)
{
  if (!obj.contains(key))
  {
    return;
  }
  try
  {
    out = obj.at(key).get<T>();
  }
  catch (json::exception const& e)
  {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Position position_from_json(json const& v, std::string const& where)
{
  if (!v.is_array() || v.size() != 3)
  {
    throw ConfigError(where + ": expected a 3-element array");
  }
  try
  {
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }
  catch (json::exception const& e)
  {
    throw ConfigError(where + ": " + e.what());
  }
}

json position_to_json(Position const& p) { return json::array({p(0), p(1), p(2)}); }

json state_to_json(StateVector const& x)
{
  json out = json::array();
  for (int i = 0; i < kStateDim; ++i)
  {
    out.push_back(x(i));
  }
  return out;
}

StateVector state_from_json(json const& v, std::string const& where)
{
  if (!v.is_array() || v.size() != static_cast<std::size_t>(kStateDim))
  {
    throw ConfigError(where + ": expected a 6-element array");
  }
  StateVector x;
  for (int i = 0; i < kStateDim; ++i)
  {
    x(i) = v[static_cast<std::size_t>(i)].get<double>();
  }
  return x;
}

Box box_from_json(json const& v, std::string const& where)
{
  check_keys(v, {"lo", "hi"}, where);
  if (!v.contains("lo") || !v.contains("hi"))
  {
    throw ConfigError(where + ": needs 'lo' and 'hi'");
  }
  return {position_from_json(v.at("lo"), where + ".lo"), position_from_json(v.at("hi"), where + ".hi")};
}

json box_to_json(Box const& b) { return {{"lo", position_to_json(b.lo)}, {"hi", position_to_json(b.hi)}}; }

std::vector<Position> positions_from_json(json const& v, std::string const& where)
{
  if (!v.is_array())
  {
    throw ConfigError(where + ": expected an array");
  }
  std::vector<Position> out;
  for (std::size_t i = 0; i < v.size(); ++i)
  {
    out.push_back(position_from_json(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json positions_to_json(std::vector<Position> const& ps)
{
  json out = json::array();
  for (auto const& p : ps)
  {
    out.push_back(position_to_json(p));
  }
  return out;
}

void check_format(json const& doc, std::string const& where)
{
  if (!doc.is_object() || !doc.contains("format_version") || doc.at("format_version") != kFormatVersion)
  {
    throw ConfigError(where + ": missing or unsupported format_version");
  }
}

std::string read_preset(std::string const& source)
{
  std::string const prefix = "preset:";
  return source.rfind(prefix, 0) == 0 ? source.substr(prefix.size()) : std::string{};
}

}  // namespace

std::string to_string(Method method)
{
  switch (method)
  {
    case Method::Pf:
      return "pf";
    case Method::Pm:
      return "pm";
    case Method::Ut:
      return "ut";
    case Method::PfHyb:
      return "pf_hyb";
  }
  return "pf";
}

Method method_from_string(std::string const& name)
{
  if (name == "pf")
  {
    return Method::Pf;
  }
  if (name == "pm")
  {
    return Method::Pm;
  }
  if (name == "ut")
  {
    return Method::Ut;
  }
  if (name == "pf_hyb")
  {
    return Method::PfHyb;
  }
  throw ConfigError("unknown method '" + name + "' (expected pf, pm, ut or pf_hyb)");
}

TrackerConfig tracker_defaults(Method method)
{
  TrackerConfig cfg;
  cfg.method = method;
  switch (method)
  {
    case Method::Pm:
      cfg.n_particles_new = 10000;
      cfg.n_particles_legacy = 600;
      break;
    case Method::PfHyb:
      cfg.n_particles_new = 500;
      cfg.n_particles_legacy = 600;
      break;
    case Method::Pf:
    case Method::Ut:
      cfg.n_particles_new = 500;
      cfg.n_particles_legacy = 30;
      cfg.kernel_covariance = KernelCovariance::Proposal;
      break;
  }
  return cfg;
}

void validate(TrackerConfig const& cfg)
{
  if (cfg.n_kernels == 0 || cfg.n_particles_new == 0 || cfg.n_particles_legacy == 0 || cfg.n_lambda < 1)
  {
    throw ConfigError("tracker: kernel, particle and pseudo-time step counts must be positive");
  }
  if (!(cfg.lambda_ratio >= 1.0))
  {
    throw ConfigError("tracker: lambda_ratio must be at least 1");
  }
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(cfg.p_th) || !unit(cfg.p_pr) || !unit(cfg.p_survival))
  {
    throw ConfigError("tracker: thresholds and survival probability must lie in [0, 1]");
  }
  if ((cfg.p_d && !unit(*cfg.p_d)) || (cfg.mu_fp && !(*cfg.mu_fp > 0.0)))
  {
    throw ConfigError("tracker: p_d must lie in [0, 1] and mu_fp must be positive");
  }
  if (!(cfg.gate.g > 0.0) || cfg.spa_max_iters < 1 || !(cfg.spa_tol > 0.0))
  {
    throw ConfigError("tracker: gate size, SPA iterations and tolerance must be positive");
  }
  if (!(cfg.sigma_w >= 0.0) || (cfg.period && !(*cfg.period > 0.0)) || !(cfg.mean_births >= 0.0) ||
      !(cfg.birth_velocity_std > 0.0) || !(cfg.birth_cov_shrink > 0.0))
  {
    throw ConfigError("tracker: invalid motion or birth parameters");
  }
  if (!(cfg.ut.alpha > 0.0) || !(cfg.ut.alpha * cfg.ut.alpha * (kStateDim + cfg.ut.kappa) > 0.0))
  {
    throw ConfigError("tracker: unscented parameters give a non-positive spread");
  }
}

json load_json_file(std::string const& path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw ConfigError("cannot open '" + path + "'");
  }
  try
  {
    return json::parse(in);
  }
  catch (json::exception const& e)
  {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(std::string const& path, json const& doc)
{
  std::ofstream out(path);
  if (!out)
  {
    throw ConfigError("cannot write '" + path + "'");
  }
  out << doc.dump(1) << '\n';
}

TrackerConfig tracker_config_from_json(json const& doc)
{
  std::string const where = "tracker";
  check_keys(doc,
             {"method", "n_kernels", "n_particles_new", "n_particles_legacy", "n_lambda", "lambda_ratio", "p_th",
              "p_pr", "gate", "ut", "update_numerator", "kernel_covariance", "spa", "motion", "birth", "detection", "sensor_order", "seed"},
             where);
  Method method = Method::Pf;
  if (doc.contains("method"))
  {
    if (!doc.at("method").is_string())
    {
      throw ConfigError("tracker.method: expected a string");
    }
    method = method_from_string(doc.at("method").get<std::string>());
  }
  TrackerConfig cfg = tracker_defaults(method);
  read(doc, "n_kernels", cfg.n_kernels, where);
  read(doc, "n_particles_new", cfg.n_particles_new, where);
  read(doc, "n_particles_legacy", cfg.n_particles_legacy, where);
  read(doc, "n_lambda", cfg.n_lambda, where);
  read(doc, "lambda_ratio", cfg.lambda_ratio, where);
  read(doc, "p_th", cfg.p_th, where);
  read(doc, "p_pr", cfg.p_pr, where);
  read(doc, "sensor_order", cfg.sensor_order, where);
  read(doc, "seed", cfg.seed, where);
  if (doc.contains("gate"))
  {
    json const& g = doc.at("gate");
    check_keys(g, {"enabled", "g"}, where + ".gate");
    read(g, "enabled", cfg.gate.enabled, where + ".gate");
    read(g, "g", cfg.gate.g, where + ".gate");
  }
  if (doc.contains("ut"))
  {
    json const& u = doc.at("ut");
    check_keys(u, {"alpha", "beta", "kappa"}, where + ".ut");
    read(u, "alpha", cfg.ut.alpha, where + ".ut");
    read(u, "beta", cfg.ut.beta, where + ".ut");
    read(u, "kappa", cfg.ut.kappa, where + ".ut");
  }
  if (doc.contains("update_numerator"))
  {
    std::string name;
    read(doc, "update_numerator", name, where);
    if (name == "kappa_weighted")
    {
      cfg.update_numerator = UpdateNumerator::KappaWeighted;
    }
    else if (name == "plain")
    {
      cfg.update_numerator = UpdateNumerator::Plain;
    }
    else
    {
      throw ConfigError("tracker.update_numerator: expected 'kappa_weighted' or 'plain'");
    }
  }
  if (doc.contains("kernel_covariance"))
  {
    std::string name;
    read(doc, "kernel_covariance", name, where);
    if (name == "particles")
    {
      cfg.kernel_covariance = KernelCovariance::Particles;
    }
    else if (name == "proposal")
    {
      cfg.kernel_covariance = KernelCovariance::Proposal;
    }
    else
    {
      throw ConfigError("tracker.kernel_covariance: expected 'particles' or 'proposal'");
    }
  }
  if (doc.contains("spa"))
  {
    json const& s = doc.at("spa");
    check_keys(s, {"max_iters", "tol"}, where + ".spa");
    read(s, "max_iters", cfg.spa_max_iters, where + ".spa");
    read(s, "tol", cfg.spa_tol, where + ".spa");
  }
  if (doc.contains("motion"))
  {
    json const& m = doc.at("motion");
    check_keys(m, {"sigma_w", "p_survival", "period"}, where + ".motion");
    read(m, "sigma_w", cfg.sigma_w, where + ".motion");
    read(m, "p_survival", cfg.p_survival, where + ".motion");
    if (m.contains("period"))
    {
      double period = 0.0;
      read(m, "period", period, where + ".motion");
      cfg.period = period;
    }
  }
  if (doc.contains("birth"))
  {
    json const& b = doc.at("birth");
    check_keys(b, {"mean_births", "velocity_std", "cov_shrink"}, where + ".birth");
    read(b, "mean_births", cfg.mean_births, where + ".birth");
    read(b, "velocity_std", cfg.birth_velocity_std, where + ".birth");
    read(b, "cov_shrink", cfg.birth_cov_shrink, where + ".birth");
  }
  if (doc.contains("detection"))
  {
    json const& d = doc.at("detection");
    check_keys(d, {"p_d", "mu_fp"}, where + ".detection");
    if (d.contains("p_d"))
    {
      double v = 0.0;
      read(d, "p_d", v, where + ".detection");
      cfg.p_d = v;
    }
    if (d.contains("mu_fp"))
    {
      double v = 0.0;
      read(d, "mu_fp", v, where + ".detection");
      cfg.mu_fp = v;
    }
  }
  validate(cfg);
  return cfg;
}

json to_json(TrackerConfig const& cfg)
{
  json doc = {
    {"method", to_string(cfg.method)},
    {"n_kernels", cfg.n_kernels},
    {"n_particles_new", cfg.n_particles_new},
    {"n_particles_legacy", cfg.n_particles_legacy},
    {"n_lambda", cfg.n_lambda},
    {"lambda_ratio", cfg.lambda_ratio},
    {"p_th", cfg.p_th},
    {"p_pr", cfg.p_pr},
    {"gate", {{"enabled", cfg.gate.enabled}, {"g", cfg.gate.g}}},
    {"ut", {{"alpha", cfg.ut.alpha}, {"beta", cfg.ut.beta}, {"kappa", cfg.ut.kappa}}},
    {"update_numerator", cfg.update_numerator == UpdateNumerator::KappaWeighted ? "kappa_weighted" : "plain"},
    {"kernel_covariance", cfg.kernel_covariance == KernelCovariance::Particles ? "particles" : "proposal"},
    {"spa", {{"max_iters", cfg.spa_max_iters}, {"tol", cfg.spa_tol}}},
    {"motion", {{"sigma_w", cfg.sigma_w}, {"p_survival", cfg.p_survival}}},
    {"birth",
     {{"mean_births", cfg.mean_births}, {"velocity_std", cfg.birth_velocity_std}, {"cov_shrink", cfg.birth_cov_shrink}}},
    {"sensor_order", cfg.sensor_order},
    {"seed", cfg.seed},
  };
  if (cfg.period)
  {
    doc["motion"]["period"] = *cfg.period;
  }
  json detection = json::object();
  if (cfg.p_d)
  {
    detection["p_d"] = *cfg.p_d;
  }
  if (cfg.mu_fp)
  {
    detection["mu_fp"] = *cfg.mu_fp;
  }
  if (!detection.empty())
  {
    doc["detection"] = detection;
  }
  return doc;
}

ScenarioConfig scenario_config_from_json(json const& doc)
{
  std::string const where = "scenario";
  check_keys(doc,
             {"preset", "roi", "array_centers", "receiver_offsets", "n_steps", "objects", "circle_radius",
              "start_depth", "horizontal_speed", "vertical_speed", "period", "sigma_w", "sigma_v", "p_d", "mu_fp",
              "sound_speed", "seed"},
             where);
  ScenarioConfig cfg = ScenarioConfig::paper_default();
  if (doc.contains("preset"))
  {
    std::string name;
    read(doc, "preset", name, where);
    cfg = load_scenario("preset:" + name);
  }
  if (doc.contains("roi"))
  {
    cfg.roi = box_from_json(doc.at("roi"), where + ".roi");
  }
  if (doc.contains("array_centers"))
  {
    cfg.array_centers = positions_from_json(doc.at("array_centers"), where + ".array_centers");
  }
  if (doc.contains("receiver_offsets"))
  {
    cfg.receiver_offsets = positions_from_json(doc.at("receiver_offsets"), where + ".receiver_offsets");
  }
  read(doc, "n_steps", cfg.n_steps, where);
  if (doc.contains("objects"))
  {
    json const& objs = doc.at("objects");
    if (!objs.is_array())
    {
      throw ConfigError(where + ".objects: expected an array");
    }
    cfg.objects.clear();
    for (std::size_t i = 0; i < objs.size(); ++i)
    {
      std::string const w = where + ".objects[" + std::to_string(i) + "]";
      check_keys(objs[i], {"birth", "death"}, w);
      ObjectSchedule o;
      read(objs[i], "birth", o.birth, w);
      read(objs[i], "death", o.death, w);
      cfg.objects.push_back(o);
    }
  }
  read(doc, "circle_radius", cfg.circle_radius, where);
  read(doc, "start_depth", cfg.start_depth, where);
  read(doc, "horizontal_speed", cfg.horizontal_speed, where);
  read(doc, "vertical_speed", cfg.vertical_speed, where);
  read(doc, "period", cfg.period, where);
  read(doc, "sigma_w", cfg.sigma_w, where);
  read(doc, "sigma_v", cfg.sigma_v, where);
  read(doc, "p_d", cfg.p_d, where);
  read(doc, "mu_fp", cfg.mu_fp, where);
  read(doc, "sound_speed", cfg.sound_speed, where);
  read(doc, "seed", cfg.seed, where);
  try
  {
    validate(cfg);
  }
  catch (std::invalid_argument const& e)
  {
    throw ConfigError(e.what());
  }
  return cfg;
}

json to_json(ScenarioConfig const& cfg)
{
  json objects = json::array();
  for (auto const& o : cfg.objects)
  {
    objects.push_back({{"birth", o.birth}, {"death", o.death}});
  }
  return {
    {"roi", box_to_json(cfg.roi)},
    {"array_centers", positions_to_json(cfg.array_centers)},
    {"receiver_offsets", positions_to_json(cfg.receiver_offsets)},
    {"n_steps", cfg.n_steps},
    {"objects", objects},
    {"circle_radius", cfg.circle_radius},
    {"start_depth", cfg.start_depth},
    {"horizontal_speed", cfg.horizontal_speed},
    {"vertical_speed", cfg.vertical_speed},
    {"period", cfg.period},
    {"sigma_w", cfg.sigma_w},
    {"sigma_v", cfg.sigma_v},
    {"p_d", cfg.p_d},
    {"mu_fp", cfg.mu_fp},
    {"sound_speed", cfg.sound_speed},
    {"seed", cfg.seed},
  };
}

ScenarioConfig load_scenario(std::string const& source)
{
  std::string const preset = read_preset(source);
  if (source.rfind("preset:", 0) == 0)
  {
    if (preset == "paper-default")
    {
      return ScenarioConfig::paper_default();
    }
    if (preset == "paper-scaled")
    {
      return ScenarioConfig::paper_scaled();
    }
    throw ConfigError("unknown scenario preset '" + preset + "' (expected paper-default or paper-scaled)");
  }
  return scenario_config_from_json(load_json_file(source));
}

TrackerConfig load_tracker(std::string const& source)
{
  if (source.rfind("preset:", 0) == 0)
  {
    std::string name = read_preset(source);
    bool scaled = false;
    std::string const suffix = "-scaled";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
    {
      scaled = true;
      name.resize(name.size() - suffix.size());
    }
    TrackerConfig cfg = tracker_defaults(method_from_string(name));
    if (scaled)
    {
      cfg.n_kernels = 25;
      cfg.gate.enabled = true;
    }
    return cfg;
  }
  return tracker_config_from_json(load_json_file(source));
}

json truth_to_json(GroundTruth const& truth)
{
  json objects = json::array();
  for (auto const& obj : truth.objects)
  {
    json states = json::array();
    for (auto const& x : obj.states)
    {
      states.push_back(state_to_json(x));
    }
    objects.push_back({{"label", obj.label}, {"birth", obj.birth}, {"death", obj.death}, {"states", states}});
  }
  return {{"format_version", kFormatVersion}, {"n_steps", truth.n_steps}, {"objects", objects}};
}

GroundTruth truth_from_json(json const& doc)
{
  check_format(doc, "truth");
  check_keys(doc, {"format_version", "n_steps", "objects"}, "truth");
  GroundTruth truth;
  try
  {
    truth.n_steps = doc.at("n_steps").get<int>();
    for (auto const& obj : doc.at("objects"))
    {
      check_keys(obj, {"label", "birth", "death", "states"}, "truth.objects");
      TruthTrack track;
      track.label = obj.at("label").get<std::int64_t>();
      track.birth = obj.at("birth").get<int>();
      track.death = obj.at("death").get<int>();
      for (auto const& x : obj.at("states"))
      {
        track.states.push_back(state_from_json(x, "truth.objects.states"));
      }
      if (track.states.size() != static_cast<std::size_t>(track.death - track.birth + 1))
      {
        throw ConfigError("truth: trajectory length does not match birth and death steps");
      }
      truth.objects.push_back(std::move(track));
    }
  }
  catch (json::exception const& e)
  {
    throw ConfigError(std::string("truth: ") + e.what());
  }
  return truth;
}

json measurements_to_json(MeasurementData const& data)
{
  json sensors = json::array();
  for (auto const& s : data.sensors)
  {
    sensors.push_back({{"receiver_a", position_to_json(s.receiver_a)},
                       {"receiver_b", position_to_json(s.receiver_b)},
                       {"sound_speed", s.sound_speed},
                       {"noise_std", s.noise_std}});
  }
  json steps = json::array();
  for (std::size_t k = 0; k < data.steps.size(); ++k)
  {
    json batches = json::array();
    for (auto const& b : data.steps[k])
    {
      batches.push_back({{"sensor", b.sensor}, {"values", b.values}, {"origins", b.origins}});
    }
    steps.push_back({{"step", k + 1}, {"batches", batches}});
  }
  return {{"format_version", kFormatVersion},
          {"sensors", sensors},
          {"detection", {{"p_d", data.detection.p_d}, {"mu_fp", data.detection.mu_fp}}},
          {"roi", box_to_json(data.roi)},
          {"period", data.period},
          {"steps", steps}};
}

MeasurementData measurements_from_json(json const& doc)
{
  check_format(doc, "measurements");
  check_keys(doc, {"format_version", "sensors", "detection", "roi", "period", "steps"}, "measurements");
  MeasurementData data;
  try
  {
    for (auto const& s : doc.at("sensors"))
    {
      check_keys(s, {"receiver_a", "receiver_b", "sound_speed", "noise_std"}, "measurements.sensors");
      Sensor sensor;
      sensor.receiver_a = position_from_json(s.at("receiver_a"), "measurements.sensors.receiver_a");
      sensor.receiver_b = position_from_json(s.at("receiver_b"), "measurements.sensors.receiver_b");
      sensor.sound_speed = s.at("sound_speed").get<double>();
      sensor.noise_std = s.at("noise_std").get<double>();
      validate_sensor(sensor);
      data.sensors.push_back(sensor);
    }
    json const& det = doc.at("detection");
    check_keys(det, {"p_d", "mu_fp"}, "measurements.detection");
    data.detection.p_d = det.at("p_d").get<double>();
    data.detection.mu_fp = det.at("mu_fp").get<double>();
    data.roi = box_from_json(doc.at("roi"), "measurements.roi");
    data.period = doc.at("period").get<double>();
    for (auto const& step : doc.at("steps"))
    {
      check_keys(step, {"step", "batches"}, "measurements.steps");
      if (step.at("step").get<std::size_t>() != data.steps.size() + 1)
      {
        throw ConfigError("measurements: steps must be numbered consecutively from 1");
      }
      std::vector<MeasurementBatch> batches;
      for (auto const& b : step.at("batches"))
      {
        check_keys(b, {"sensor", "values", "origins"}, "measurements.steps.batches");
        MeasurementBatch batch;
        batch.sensor = b.at("sensor").get<int>();
        batch.values = b.at("values").get<std::vector<double>>();
        if (b.contains("origins"))
        {
          batch.origins = b.at("origins").get<std::vector<std::int64_t>>();
        }
        if (batch.sensor < 0 || static_cast<std::size_t>(batch.sensor) >= data.sensors.size())
        {
          throw ConfigError("measurements: batch refers to an unknown sensor");
        }
        batches.push_back(std::move(batch));
      }
      data.steps.push_back(std::move(batches));
    }
  }
  catch (json::exception const& e)
  {
    throw ConfigError(std::string("measurements: ") + e.what());
  }
  catch (std::invalid_argument const& e)
  {
    throw ConfigError(std::string("measurements: ") + e.what());
  }
  return data;
}

}  // namespace pfmot
