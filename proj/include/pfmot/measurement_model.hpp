#pragma once

#include "pfmot/core.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <vector>

namespace pfmot
{

struct Interval
{
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double length() const { return hi - lo; }
  [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Measurement model z = h(x) + v, v ~ N(0, R), with a false-positive density on the
/// measurement space. State dimension is fixed; the measurement dimension is a template
/// parameter so the flow code can be exercised with vector-valued linear models.
template <int ZDim>
class MeasurementModel
{
public:
  using ZVector = Eigen::Matrix<double, ZDim, 1>;
  using Jacobian = Eigen::Matrix<double, ZDim, kStateDim>;
  using NoiseCov = Eigen::Matrix<double, ZDim, ZDim>;

  explicit MeasurementModel(NoiseCov const& noise_cov) : _noise(ZVector::Zero(), noise_cov)
  {
    _noise_cov = 0.5 * (noise_cov + noise_cov.transpose());
    _noise_inv = _noise_cov.inverse();
  }
  virtual ~MeasurementModel() = default;
  MeasurementModel(MeasurementModel const&) = default;
  MeasurementModel& operator=(MeasurementModel const&) = default;

  [[nodiscard]] virtual ZVector predict(StateVector const& x) const = 0;
  [[nodiscard]] virtual Jacobian jacobian(StateVector const& x) const = 0;
  [[nodiscard]] virtual double fp_density(ZVector const& z) const = 0;

  [[nodiscard]] NoiseCov const& noise_cov() const { return _noise_cov; }
  [[nodiscard]] NoiseCov const& noise_inv() const { return _noise_inv; }

  [[nodiscard]] double log_likelihood(ZVector const& z, StateVector const& x) const
  {
    return _noise.log_pdf(z - predict(x));
  }
  [[nodiscard]] double log_likelihood_of_residual(ZVector const& residual) const { return _noise.log_pdf(residual); }
  [[nodiscard]] double likelihood(ZVector const& z, StateVector const& x) const
  {
    return std::exp(log_likelihood(z, x));
  }

private:
  MvnDensity<ZDim> _noise;
  NoiseCov _noise_cov;
  NoiseCov _noise_inv;
};

using ScalarModel = MeasurementModel<1>;

/// Receiver pair measuring the time difference of arrival.
struct Sensor
{
  Position receiver_a = Position::Zero();
  Position receiver_b = Position::UnitX();
  double sound_speed = 1500.0;
  double noise_std = 1e-6;
};

inline constexpr double kDegenerateGeometryRadius = 1e-6;

double tdoa_predict(Sensor const& sensor, StateVector const& x);
Eigen::Matrix<double, 1, kStateDim> tdoa_jacobian(Sensor const& sensor, StateVector const& x);

struct FpDensity
{
  double density = 0.0;
  Interval support;
};

FpDensity fp_density_uniform(Sensor const& sensor);

void validate_sensor(Sensor const& sensor);

class TdoaModel final : public ScalarModel
{
public:
  explicit TdoaModel(Sensor const& sensor);

  [[nodiscard]] ZVector predict(StateVector const& x) const override;
  [[nodiscard]] Jacobian jacobian(StateVector const& x) const override;
  [[nodiscard]] double fp_density(ZVector const& z) const override;

  [[nodiscard]] Sensor const& sensor() const { return _sensor; }
  [[nodiscard]] Interval support() const { return _fp.support; }

private:
  Sensor _sensor;
  FpDensity _fp;
};

/// z = H x + v with a constant false-positive density on a box support.
template <int ZDim>
class LinearModel final : public MeasurementModel<ZDim>
{
public:
  using Base = MeasurementModel<ZDim>;
  using typename Base::Jacobian;
  using typename Base::NoiseCov;
  using typename Base::ZVector;

  LinearModel(Jacobian const& h, NoiseCov const& r, double fp_density = 1.0)
    : Base(r), _h(h), _fp_density(fp_density)
  {
  }

  [[nodiscard]] ZVector predict(StateVector const& x) const override { return _h * x; }
  [[nodiscard]] Jacobian jacobian(StateVector const&) const override { return _h; }
  [[nodiscard]] double fp_density(ZVector const&) const override { return _fp_density; }

private:
  Jacobian _h;
  double _fp_density;
};

}  // namespace pfmot
