#include "ranking_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

namespace salnet::testing {

// Gaussian elimination with partial pivoting on an augmented dense system.
std::vector<double> dense_solve(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

Matrix oracle_affinity(const std::vector<Color>& colors, std::size_t side, double sigma2) {
  const std::size_t n = side * side;
  Matrix w(n, std::vector<double>(n, 0.0));
  auto border = [&](std::size_t i) {
    const std::size_t r = i / side, c = i % side;
    return r == 0 || c == 0 || r == side - 1 || c == side - 1;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const long dr = std::labs(static_cast<long>(i / side) - static_cast<long>(j / side));
      const long dc = std::labs(static_cast<long>(i % side) - static_cast<long>(j % side));
      if ((dr <= 1 && dc <= 1) || (border(i) && border(j))) {
        double d2 = 0.0;
        for (int k = 0; k < 3; ++k) d2 += (colors[i][k] - colors[j][k]) * (colors[i][k] - colors[j][k]);
        w[i][j] = std::exp(-d2 / (2 * sigma2));
      }
    }
  }
  return w;
}

std::vector<double> oracle_rank(const Matrix& w, const std::vector<double>& y, double alpha) {
  const std::size_t n = y.size();
  Matrix a(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::accumulate(w[i].begin(), w[i].end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? d : 0.0) - alpha * w[i][j];
  }
  auto f = dense_solve(a, y);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  const double low = *lo, range = *hi - *lo;
  for (double& v : f) v = (v - low) / range;
  return f;
}

}  // namespace salnet::testing
