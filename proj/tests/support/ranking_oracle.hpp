#pragma once

#include <vector>

#include "salnet/manifold_ranking.hpp"

namespace salnet::testing {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> dense_solve(Matrix a, std::vector<double> b);

/// Grid affinity built from scratch: 8-neighbours plus all border pairs.
Matrix oracle_affinity(const std::vector<Color>& colors, std::size_t side, double sigma2);

/// Min-max normalized solution of (D - alpha W) f = y by dense elimination.
std::vector<double> oracle_rank(const Matrix& w, const std::vector<double>& y, double alpha);

}  // namespace salnet::testing
