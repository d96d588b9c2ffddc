#pragma once

#include "pfmot/core.hpp"

#include <vector>

namespace pfmot
{

/// Minimum-cost assignment of every row to a distinct column of a rows <= cols cost
/// matrix (Hungarian method with potentials). Returns the column of each row.
std::vector<int> min_cost_assignment(Eigen::MatrixXd const& cost);

/// OSPA distance between two sets of positions with cutoff c and order p.
double ospa(std::vector<Position> const& x, std::vector<Position> const& y, double cutoff, double order);

}  // namespace pfmot
