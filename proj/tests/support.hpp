#pragma once

#include "pfmot/core.hpp"
#include "pfmot/measurement_model.hpp"
#include "pfmot/rng.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace pfmot::test
{

/// z = x[axis] + v, v ~ N(0, r).
inline LinearModel<1> coordinate_model(int axis, double r, double fp_density = 1.0)
{
  Eigen::Matrix<double, 1, kStateDim> h = Eigen::Matrix<double, 1, kStateDim>::Zero();
  h(0, axis) = 1.0;
  return LinearModel<1>(h, Eigen::Matrix<double, 1, 1>::Constant(r), fp_density);
}

inline double normal_pdf(double x, double mean, double var)
{
  double const d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

template <int ZDim>
struct KalmanPosterior
{
  StateVector mean;
  Covariance cov;
  double evidence = 0.0;
};

/// Plain Kalman update written with explicit inverses (oracle, not the code under test).
template <int ZDim>
KalmanPosterior<ZDim> kalman(StateVector const& m, Covariance const& P,
                             Eigen::Matrix<double, ZDim, kStateDim> const& H,
                             Eigen::Matrix<double, ZDim, ZDim> const& R, Eigen::Matrix<double, ZDim, 1> const& z)
{
  Eigen::Matrix<double, ZDim, ZDim> const S = H * P * H.transpose() + R;
  Eigen::Matrix<double, ZDim, ZDim> const S_inv = S.inverse();
  Eigen::Matrix<double, kStateDim, ZDim> const K = P * H.transpose() * S_inv;
  KalmanPosterior<ZDim> out;
  out.mean = m + K * (z - H * m);
  out.cov = (Covariance::Identity() - K * H) * P;
  Eigen::Matrix<double, ZDim, 1> const r = z - H * m;
  double const quad = r.dot(S_inv * r);
  out.evidence = std::exp(-0.5 * quad) / std::sqrt(std::pow(2.0 * std::numbers::pi, ZDim) * S.determinant());
  return out;
}

struct Moments
{
  StateVector mean = StateVector::Zero();
  Covariance cov = Covariance::Zero();
};

inline Moments weighted_moments(std::vector<StateVector> const& xs, std::vector<double> const& ws)
{
  double total = 0.0;
  Moments out;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    total += ws[i];
    out.mean += ws[i] * xs[i];
  }
  out.mean /= total;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    StateVector const d = xs[i] - out.mean;
    out.cov += ws[i] / total * d * d.transpose();
  }
  return out;
}

inline Moments sample_moments(std::vector<StateVector> const& xs)
{
  return weighted_moments(xs, std::vector<double>(xs.size(), 1.0));
}

inline Covariance random_spd(Rng& rng, double scale = 1.0)
{
  Covariance a;
  for (int i = 0; i < kStateDim; ++i)
  {
    for (int j = 0; j < kStateDim; ++j)
    {
      a(i, j) = rng.normal();
    }
  }
  return scale * (a * a.transpose() / kStateDim + 0.1 * Covariance::Identity());
}

inline StateVector random_state(Rng& rng, double scale = 1.0)
{
  return scale * rng.standard_normal<kStateDim>();
}

inline bool rel_close(double a, double b, double rel)
{
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

}  // namespace pfmot::test
