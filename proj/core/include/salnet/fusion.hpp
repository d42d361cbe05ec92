#pragma once

#include <array>
#include <optional>
#include <string>

#include "salnet/backward.hpp"
#include "salnet/network.hpp"
#include "salnet/tensor.hpp"

namespace salnet {

struct FusionConfig {
  /// Weights for the conv3, conv4, conv5 and fc cues, in that order.
  std::array<float, 4> layer_weights{1.0f, 5.0f, 10.0f, 1.0f};
  std::size_t blur_size = 11;
  double blur_sigma = 2.0;
  /// Sigmoid sharpness of the final normalization.
  float eta = 10.0f;
  /// Value of the center-bias prior at the farthest corner.
  float center_bias_floor = 0.25f;
  bool center_bias = true;
  std::size_t output_size = 224;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

enum class Stage { PerLayer, TopDown, Modulated, Normalized };

const char* to_string(Stage stage);

struct SaliencyMap {
  Tensor values;  // output_size x output_size
  Stage stage = Stage::TopDown;
  BackwardMode mode = BackwardMode::PG;
  std::string bottom_up = "none";
};

/// Sum over channels of fw * bw; returns H x W.
Tensor channel_product_sum(const Tensor& fw, const Tensor& bw);

/// channel_product_sum, bilinear-resized to output_size and Gaussian-blurred.
Tensor sublayer_saliency(const Tensor& fw, const Tensor& bw, const FusionConfig& config);

/// Linear fall-off with distance from the image center: 1.0 on the pixels
/// closest to the center, `floor` on the corner pixels.
Tensor center_bias_map(std::size_t size = 224, float floor = 0.25f);

/// M * sum_n W_n * per_layer[n]; M is all ones when center bias is disabled.
SaliencyMap top_down(const std::array<Tensor, 4>& per_layer, const FusionConfig& config,
                     BackwardMode mode);

/// Elementwise td * exp(bu). `bu` must lie in [0, 1].
SaliencyMap modulate(const SaliencyMap& td, const Tensor& bu, std::string bottom_up_source);

/// Rescales by the maximum (when positive), then applies
/// 1 / (1 + exp(-eta * (s - mean(s)))). An all-zero map becomes uniform 0.5.
SaliencyMap normalize(const SaliencyMap& s, float eta);

/// Per-pixel max over channels of |d(initial . logits)/d(input)|, computed by
/// plain backprop down to the network input.
Tensor input_sensitivity(const Network& net, const ActivationCache& cache, const Tensor& initial);

/// Gradient-to-image baseline: input_sensitivity blurred and rescaled to [0, 1].
Tensor bps_baseline(const Network& net, const ActivationCache& cache, const FusionConfig& config,
                    std::optional<std::size_t> one_hot = {});

}  // namespace salnet
