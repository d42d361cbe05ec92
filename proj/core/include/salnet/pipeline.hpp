#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "salnet/backward.hpp"
#include "salnet/fusion.hpp"
#include "salnet/image_io.hpp"
#include "salnet/manifold_ranking.hpp"
#include "salnet/network.hpp"
#include "salnet/vgg16.hpp"

namespace salnet {

/// Where the bottom-up modulation map comes from.
struct BottomUpSource {
  enum class Kind { None, ManifoldRanking, File };
  Kind kind = Kind::ManifoldRanking;
  std::filesystem::path path;  // Kind::File only

  /// Parses "mr", "none" or "file:<path>"; throws std::invalid_argument.
  static BottomUpSource parse(const std::string& text);
  std::string describe() const;
};

struct PipelineOptions {
  BackwardMode mode = BackwardMode::PG;
  FusionConfig fusion;
  BottomUpSource bottom_up;
  ManifoldRankingConfig manifold_ranking;
  bool through_softmax = false;
  std::optional<std::size_t> one_hot;
};

struct StageTimes {
  double preprocess = 0.0;
  double forward = 0.0;
  double backward = 0.0;
  double fusion = 0.0;
  double bottom_up = 0.0;
  double normalize = 0.0;

  double total() const { return preprocess + forward + backward + fusion + bottom_up + normalize; }
};

struct PipelineResult {
  std::array<Tensor, 4> per_layer;  // conv3, conv4, conv5, fc
  SaliencyMap top_down;
  SaliencyMap modulated;
  SaliencyMap normalized;
  StageTimes times;
};

/// S_BU for the image, or an all-zero map for BottomUpSource::Kind::None.
Tensor compute_bottom_up(const Image& image, const PipelineOptions& options);

/// Backward pass, fusion, modulation and normalization on an existing
/// forward cache. `net` must have the VGG16 block layout (five blocks).
PipelineResult saliency_from_cache(const Network& net, const ActivationCache& cache,
                                   const Tensor& bottom_up, const PipelineOptions& options);

/// preprocess -> forward -> saliency_from_cache, with bottom-up computed from the image.
PipelineResult run_pipeline(const Vgg16Model& model, const Image& image, const PipelineOptions& options);

}  // namespace salnet
