#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <vector>

#include "salnet/image_io.hpp"
#include "salnet/tensor.hpp"

namespace salnet {

class RankingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected weighted graph stored as a dense, symmetric affinity matrix.
struct AffinityGraph {
  std::size_t nodes = 0;
  std::vector<double> affinity;  // nodes x nodes, row-major
  std::vector<double> degree;    // row sums of affinity

  double weight(std::size_t i, std::size_t j) const { return affinity[i * nodes + j]; }
};

/// Validates symmetry, non-negativity and an empty diagonal, then fills in
/// the degree vector. Throws std::invalid_argument otherwise.
AffinityGraph make_graph(std::size_t nodes, std::vector<double> affinity);

using Color = std::array<double, 3>;

/// side x side grid of patches: 8-neighbour edges plus a clique over all
/// border patches, w_ij = exp(-|c_i - c_j|^2 / (2 sigma2)).
AffinityGraph make_grid_graph(const std::vector<Color>& colors, std::size_t side, double sigma2);

/// Solves (D - alpha W) f = y once per query vector, reusing one factorization.
class ManifoldRanker {
 public:
  ManifoldRanker(const AffinityGraph& graph, double alpha);
  ~ManifoldRanker();
  ManifoldRanker(ManifoldRanker&&) noexcept;
  ManifoldRanker& operator=(ManifoldRanker&&) noexcept;

  /// Raw ranking scores f*.
  std::vector<double> solve(const std::vector<double>& queries) const;
  /// f* min-max normalized to [0, 1]; a constant f* maps to all zeros.
  std::vector<double> rank(const std::vector<double>& queries) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot helper: ManifoldRanker(graph, alpha).rank(queries).
std::vector<double> rank(const AffinityGraph& graph, const std::vector<double>& queries, double alpha);

std::vector<double> min_max_normalize(std::vector<double> values);

struct ManifoldRankingConfig {
  std::size_t grid = 28;
  double alpha = 0.99;
  double sigma2 = 0.1;
  std::size_t output_size = 224;
};

/// Mean CIELAB color of each grid patch, each component scaled to roughly
/// unit range (L / 100, a / 255 + 0.5, b / 255 + 0.5).
std::vector<Color> patch_colors(const Image& image, std::size_t grid, std::size_t work_size = 224);

/// Per-node two-stage ranking: border-query background stage, then a
/// foreground-query stage. Returns grid*grid scores in [0, 1].
std::vector<double> manifold_ranking_scores(const Image& image, const ManifoldRankingConfig& config);

/// Bottom-up saliency map, output_size x output_size in [0, 1]. Images with no
/// color contrast between patches produce an all-zero map.
Tensor bottom_up_saliency(const Image& image, const ManifoldRankingConfig& config = {});

/// Loads a grayscale map produced elsewhere, resized to size x size and
/// scaled to [0, 1] by 1/255.
Tensor load_external_map(const std::filesystem::path& path, std::size_t size = 224);

}  // namespace salnet
