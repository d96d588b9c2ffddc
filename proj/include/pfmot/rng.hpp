#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pfmot
{

inline constexpr std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

/// Seedable random stream. Child streams depend only on the parent seed and the key,
/// never on how much of the parent has been consumed, so results do not depend on
/// evaluation order or thread count.
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0) : _seed(seed), _engine(splitmix64(seed)) {}

  [[nodiscard]] std::uint64_t seed() const { return _seed; }

  [[nodiscard]] Rng split(std::uint64_t key) const
  {
    return Rng(splitmix64(_seed ^ splitmix64(key + 0x632be59bd9b4e019ULL)));
  }

  [[nodiscard]] Rng split(std::initializer_list<std::uint64_t> keys) const
  {
    Rng out = *this;
    for (auto key : keys)
    {
      out = out.split(key);
    }
    return out;
  }

  std::mt19937_64& engine() { return _engine; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(_engine); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(_engine); }
  double normal() { return _normal(_engine); }
  double normal(double mean, double stddev) { return mean + stddev * _normal(_engine); }

  int poisson(double mean)
  {
    if (mean <= 0.0)
    {
      return 0;
    }
    return std::poisson_distribution<int>(mean)(_engine);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <int Dim>
  Eigen::Matrix<double, Dim, 1> standard_normal()
  {
    Eigen::Matrix<double, Dim, 1> out;
    for (int i = 0; i < Dim; ++i)
    {
      out(i) = _normal(_engine);
    }
    return out;
  }

private:
  std::uint64_t _seed;
  std::mt19937_64 _engine;
  std::normal_distribution<double> _normal{0.0, 1.0};
};

}  // namespace pfmot
