#include "pfmot/ospa.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pfmot
{

std::vector<int> min_cost_assignment(Eigen::MatrixXd const& cost)
{
  auto const n = static_cast<int>(cost.rows());
  auto const m = static_cast<int>(cost.cols());
  if (n > m)
  {
    throw std::invalid_argument("min_cost_assignment: more rows than columns");
  }
  double const inf = std::numeric_limits<double>::infinity();
  // 1-based potentials u (rows), v (columns); p[j] is the row matched to column j.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i)
  {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(m) + 1, false);
    do
    {
      used[static_cast<std::size_t>(j0)] = true;
      int const i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j)
      {
        auto const ju = static_cast<std::size_t>(j);
        if (used[ju])
        {
          continue;
        }
        double const cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[ju];
        if (cur < minv[ju])
        {
          minv[ju] = cur;
          way[ju] = j0;
        }
        if (minv[ju] < delta)
        {
          delta = minv[ju];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j)
      {
        auto const ju = static_cast<std::size_t>(j);
        if (used[ju])
        {
          u[static_cast<std::size_t>(p[ju])] += delta;
          v[ju] -= delta;
        }
        else
        {
          minv[ju] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do
    {
      int const j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
  {
    if (p[static_cast<std::size_t>(j)] != 0)
    {
      out[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
  }
  return out;
}

double ospa(std::vector<Position> const& x, std::vector<Position> const& y, double cutoff, double order)
{
  if (!(cutoff > 0.0) || !(order >= 1.0))
  {
    throw std::invalid_argument("ospa: need cutoff > 0 and order >= 1");
  }
  auto const& small = x.size() <= y.size() ? x : y;
  auto const& large = x.size() <= y.size() ? y : x;
  std::size_t const m = small.size();
  std::size_t const n = large.size();
  if (n == 0)
  {
    return 0.0;
  }
  double total = 0.0;
  if (m > 0)
  {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < m; ++i)
    {
      for (std::size_t j = 0; j < n; ++j)
      {
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(std::min((small[i] - large[j]).norm(), cutoff), order);
      }
    }
    std::vector<int> const assignment = min_cost_assignment(cost);
    for (std::size_t i = 0; i < m; ++i)
    {
      total += cost(static_cast<Eigen::Index>(i), assignment[i]);
    }
  }
  total += std::pow(cutoff, order) * static_cast<double>(n - m);
  return std::pow(total / static_cast<double>(n), 1.0 / order);
}

}  // namespace pfmot
