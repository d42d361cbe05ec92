#include "salnet/manifold_ranking.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "salnet/ops.hpp"

namespace salnet {

AffinityGraph make_graph(std::size_t nodes, std::vector<double> affinity) {
  if (nodes == 0 || affinity.size() != nodes * nodes) {
    throw std::invalid_argument("make_graph: affinity must be nodes x nodes");
  }
  AffinityGraph g{nodes, std::move(affinity), std::vector<double>(nodes, 0.0)};
  for (std::size_t i = 0; i < nodes; ++i) {
    if (g.weight(i, i) != 0.0) throw std::invalid_argument("make_graph: nonzero self affinity");
    for (std::size_t j = 0; j < nodes; ++j) {
      const double w = g.weight(i, j);
      if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("make_graph: negative or non-finite affinity");
      if (w != g.weight(j, i)) throw std::invalid_argument("make_graph: affinity not symmetric");
      g.degree[i] += w;
    }
  }
  return g;
}

AffinityGraph make_grid_graph(const std::vector<Color>& colors, std::size_t side, double sigma2) {
  if (side < 2) throw std::invalid_argument("make_grid_graph: grid side must be >= 2");
  if (colors.size() != side * side) throw std::invalid_argument("make_grid_graph: need side*side colors");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("make_grid_graph: sigma2 must be > 0");
  const std::size_t n = side * side;
  std::vector<double> w(n * n, 0.0);
  auto link = [&](std::size_t i, std::size_t j) {
    if (i == j) return;
    double d2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) d2 += (colors[i][k] - colors[j][k]) * (colors[i][k] - colors[j][k]);
    const double a = std::exp(-d2 / (2.0 * sigma2));
    w[i * n + j] = a;
    w[j * n + i] = a;
  };
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      const std::size_t i = r * side + c;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const auto rr = static_cast<std::ptrdiff_t>(r) + dr;
          const auto cc = static_cast<std::ptrdiff_t>(c) + dc;
          if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(side) || cc >= static_cast<std::ptrdiff_t>(side)) continue;
          link(i, static_cast<std::size_t>(rr) * side + static_cast<std::size_t>(cc));
        }
      }
    }
  }
  std::vector<std::size_t> border;
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      if (r == 0 || c == 0 || r + 1 == side || c + 1 == side) border.push_back(r * side + c);
    }
  }
  for (std::size_t a = 0; a < border.size(); ++a) {
    for (std::size_t b = a + 1; b < border.size(); ++b) link(border[a], border[b]);
  }
  return make_graph(n, std::move(w));
}

struct ManifoldRanker::Impl {
  std::size_t nodes;
  Eigen::LLT<Eigen::MatrixXd> factor;
};

ManifoldRanker::ManifoldRanker(const AffinityGraph& graph, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("manifold ranking: alpha must lie in [0, 1)");
  const auto n = static_cast<Eigen::Index>(graph.nodes);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      graph.affinity.data(), n, n);
  Eigen::MatrixXd system = -alpha * w;
  for (Eigen::Index i = 0; i < n; ++i) system(i, i) += graph.degree[static_cast<std::size_t>(i)];
  impl_ = std::make_unique<Impl>(Impl{graph.nodes, Eigen::LLT<Eigen::MatrixXd>(system)});
  if (impl_->factor.info() != Eigen::Success) {
    throw RankingError("manifold ranking: (D - alpha W) is singular or indefinite (isolated node?)");
  }
}

ManifoldRanker::~ManifoldRanker() = default;
ManifoldRanker::ManifoldRanker(ManifoldRanker&&) noexcept = default;
ManifoldRanker& ManifoldRanker::operator=(ManifoldRanker&&) noexcept = default;

std::vector<double> ManifoldRanker::solve(const std::vector<double>& queries) const {
  if (queries.size() != impl_->nodes) throw std::invalid_argument("manifold ranking: query length != node count");
  for (double q : queries) {
    if (q != 0.0 && q != 1.0) throw std::invalid_argument("manifold ranking: queries must be 0 or 1");
  }
  const auto n = static_cast<Eigen::Index>(impl_->nodes);
  Eigen::Map<const Eigen::VectorXd> y(queries.data(), n);
  const Eigen::VectorXd f = impl_->factor.solve(y);
  if (!f.allFinite()) throw RankingError("manifold ranking: solve produced non-finite scores");
  return {f.data(), f.data() + n};
}

std::vector<double> ManifoldRanker::rank(const std::vector<double>& queries) const {
  return min_max_normalize(solve(queries));
}

std::vector<double> rank(const AffinityGraph& graph, const std::vector<double>& queries, double alpha) {
  return ManifoldRanker(graph, alpha).rank(queries);
}

std::vector<double> min_max_normalize(std::vector<double> values) {
  if (values.empty()) return values;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double low = *lo, range = *hi - *lo;
  if (!(range > 1e-12 * std::max(1.0, std::abs(*hi)))) {
    std::fill(values.begin(), values.end(), 0.0);
    return values;
  }
  for (double& v : values) v = (v - low) / range;
  return values;
}

namespace {

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// sRGB (0..255) -> CIELAB under D65, scaled to roughly unit range.
Color rgb_to_unit_lab(double r8, double g8, double b8) {
  const double r = srgb_to_linear(r8 / 255.0);
  const double g = srgb_to_linear(g8 / 255.0);
  const double b = srgb_to_linear(b8 / 255.0);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
  const double l = 116.0 * fy - 16.0;
  const double a = 500.0 * (fx - fy);
  const double bb = 200.0 * (fy - fz);
  return {l / 100.0, a / 255.0 + 0.5, bb / 255.0 + 0.5};
}

}  // namespace

std::vector<Color> patch_colors(const Image& image, std::size_t grid, std::size_t work_size) {
  if (image.channels != 3) throw ImageError("patch_colors: expected an RGB image");
  if (grid == 0 || work_size < grid) throw std::invalid_argument("patch_colors: bad grid size");
  const Tensor planar = to_planar(image);
  const std::size_t h = image.height, w = image.width;
  std::array<Tensor, 3> resized;
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor channel({h, w}, std::vector<float>(planar.raw() + c * h * w, planar.raw() + (c + 1) * h * w));
    resized[c] = resize_bilinear(channel, work_size, work_size);
  }
  std::vector<Color> colors(grid * grid, Color{0.0, 0.0, 0.0});
  std::vector<std::size_t> counts(grid * grid, 0);
  for (std::size_t y = 0; y < work_size; ++y) {
    const std::size_t py = y * grid / work_size;
    for (std::size_t x = 0; x < work_size; ++x) {
      const std::size_t p = py * grid + x * grid / work_size;
      const Color lab = rgb_to_unit_lab(resized[0].at(y, x), resized[1].at(y, x), resized[2].at(y, x));
      for (std::size_t k = 0; k < 3; ++k) colors[p][k] += lab[k];
      ++counts[p];
    }
  }
  for (std::size_t p = 0; p < colors.size(); ++p) {
    for (double& v : colors[p]) v /= static_cast<double>(counts[p]);
  }
  return colors;
}

std::vector<double> manifold_ranking_scores(const Image& image, const ManifoldRankingConfig& config) {
  const std::size_t side = config.grid, n = side * side;
  const auto colors = patch_colors(image, side, std::max(config.output_size, side));

  double spread = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto [lo, hi] = std::minmax_element(colors.begin(), colors.end(),
                                              [k](const Color& a, const Color& b) { return a[k] < b[k]; });
    spread = std::max(spread, (*hi)[k] - (*lo)[k]);
  }
  if (spread < 1e-9) return std::vector<double>(n, 0.0);

  const ManifoldRanker ranker(make_grid_graph(colors, side, config.sigma2), config.alpha);

  // Stage 1: each image side in turn is the background query set.
  std::vector<double> background(n, 1.0);
  for (int s = 0; s < 4; ++s) {
    std::vector<double> queries(n, 0.0);
    for (std::size_t i = 0; i < side; ++i) {
      const std::size_t node = s == 0   ? i                          // top
                               : s == 1 ? (side - 1) * side + i      // bottom
                               : s == 2 ? i * side                   // left
                                        : i * side + side - 1;       // right
      queries[node] = 1.0;
    }
    const auto f = ranker.rank(queries);
    for (std::size_t i = 0; i < n; ++i) background[i] *= 1.0 - f[i];
  }

  // Stage 2: nodes above the stage-1 mean become foreground queries.
  const double mean = std::accumulate(background.begin(), background.end(), 0.0) / static_cast<double>(n);
  std::vector<double> queries(n);
  for (std::size_t i = 0; i < n; ++i) queries[i] = background[i] >= mean ? 1.0 : 0.0;
  return ranker.rank(queries);
}

Tensor bottom_up_saliency(const Image& image, const ManifoldRankingConfig& config) {
  const auto scores = manifold_ranking_scores(image, config);
  const std::size_t side = config.grid;
  Tensor grid({side, side});
  for (std::size_t i = 0; i < scores.size(); ++i) grid[i] = static_cast<float>(scores[i]);
  Tensor map = resize_bilinear(grid, config.output_size, config.output_size);
  const float lo = min_value(map), hi = max_value(map);
  if (hi - lo > 0.0f) {
    for (float& v : map.data()) v = std::clamp((v - lo) / (hi - lo), 0.0f, 1.0f);
  } else {
    map.fill(0.0f);
  }
  return map;
}

Tensor load_external_map(const std::filesystem::path& path, std::size_t size) {
  const Image img = read_image(path, 1);
  Tensor map = to_planar(img).reshaped({img.height, img.width});
  map = resize_bilinear(map, size, size);
  for (float& v : map.data()) v = std::clamp(v / 255.0f, 0.0f, 1.0f);
  return map;
}

}  // namespace salnet
