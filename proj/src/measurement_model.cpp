#include "pfmot/measurement_model.hpp"

#include <stdexcept>

namespace pfmot
{

namespace
{

void check_geometry(Sensor const& sensor, Position const& p)
{
  if ((p - sensor.receiver_a).norm() < kDegenerateGeometryRadius ||
      (p - sensor.receiver_b).norm() < kDegenerateGeometryRadius)
  {
    throw NumericError(ErrorKind::DegenerateGeometry, "state coincides with a receiver");
  }
}

ScalarModel::NoiseCov checked_noise(Sensor const& sensor)
{
  validate_sensor(sensor);
  if (!(sensor.noise_std > 0.0))
  {
    throw std::invalid_argument("sensor noise std must be positive for tracking");
  }
  return ScalarModel::NoiseCov::Constant(sensor.noise_std * sensor.noise_std);
}

}  // namespace

void validate_sensor(Sensor const& sensor)
{
  if (!((sensor.receiver_a - sensor.receiver_b).norm() > 0.0))
  {
    throw std::invalid_argument("sensor receivers must be distinct");
  }
  if (!(sensor.sound_speed > 0.0) || !(sensor.noise_std >= 0.0))
  {
    throw std::invalid_argument("sensor sound speed must be positive and noise std nonnegative");
  }
}

double tdoa_predict(Sensor const& sensor, StateVector const& x)
{
  Position const p = position_of(x);
  check_geometry(sensor, p);
  return ((p - sensor.receiver_a).norm() - (p - sensor.receiver_b).norm()) / sensor.sound_speed;
}

Eigen::Matrix<double, 1, kStateDim> tdoa_jacobian(Sensor const& sensor, StateVector const& x)
{
  Position const p = position_of(x);
  check_geometry(sensor, p);
  Position const da = p - sensor.receiver_a;
  Position const db = p - sensor.receiver_b;
  Eigen::Matrix<double, 1, kStateDim> out = Eigen::Matrix<double, 1, kStateDim>::Zero();
  out.head<3>() = ((da / da.norm() - db / db.norm()) / sensor.sound_speed).transpose();
  return out;
}

FpDensity fp_density_uniform(Sensor const& sensor)
{
  double const half = (sensor.receiver_a - sensor.receiver_b).norm() / sensor.sound_speed;
  return {1.0 / (2.0 * half), {-half, half}};
}

TdoaModel::TdoaModel(Sensor const& sensor)
  : ScalarModel(checked_noise(sensor)), _sensor(sensor), _fp(fp_density_uniform(sensor))
{
}

TdoaModel::ZVector TdoaModel::predict(StateVector const& x) const
{
  return ZVector::Constant(tdoa_predict(_sensor, x));
}

TdoaModel::Jacobian TdoaModel::jacobian(StateVector const& x) const { return tdoa_jacobian(_sensor, x); }

double TdoaModel::fp_density(ZVector const& z) const { return _fp.support.contains(z(0)) ? _fp.density : 0.0; }

}  // namespace pfmot
