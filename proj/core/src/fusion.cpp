#include "salnet/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "salnet/ops.hpp"

namespace salnet {

void FusionConfig::validate() const {
  for (float w : layer_weights) {
    if (!(w >= 0.0f) || !std::isfinite(w)) throw std::invalid_argument("layer weights must be finite and >= 0");
  }
  if (blur_size == 0 || blur_size % 2 == 0) throw std::invalid_argument("blur size must be odd and >= 1");
  if (!(blur_sigma > 0.0)) throw std::invalid_argument("blur sigma must be > 0");
  if (!(eta > 0.0f) || !std::isfinite(eta)) throw std::invalid_argument("eta must be > 0");
  if (!(center_bias_floor > 0.0f && center_bias_floor <= 1.0f)) {
    throw std::invalid_argument("center bias floor must lie in (0, 1]");
  }
  if (output_size == 0) throw std::invalid_argument("output size must be positive");
}

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::PerLayer: return "per-layer";
    case Stage::TopDown: return "top-down";
    case Stage::Modulated: return "modulated";
    case Stage::Normalized: return "normalized";
  }
  return "?";
}

Tensor channel_product_sum(const Tensor& fw, const Tensor& bw) {
  require_same_shape(fw, bw, "channel_product_sum");
  if (fw.rank() != 3) throw ShapeError("channel_product_sum: expected C x H x W, got " + to_string(fw.shape()));
  const std::size_t channels = fw.dim(0), h = fw.dim(1), w = fw.dim(2), plane = h * w;
  Tensor out({h, w});
  for (std::size_t c = 0; c < channels; ++c) {
    const float* f = fw.raw() + c * plane;
    const float* b = bw.raw() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] += f[i] * b[i];
  }
  return out;
}

Tensor sublayer_saliency(const Tensor& fw, const Tensor& bw, const FusionConfig& config) {
  const Tensor summed = channel_product_sum(fw, bw);
  const Tensor resized = resize_bilinear(summed, config.output_size, config.output_size);
  return gaussian_blur(resized, config.blur_size, config.blur_sigma);
}

Tensor center_bias_map(std::size_t size, float floor) {
  if (size == 0) throw std::invalid_argument("center_bias_map: empty size");
  // Pixel centers sit at integer coordinates; the image center is (size-1)/2.
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  const double nearest = std::abs(std::round(center) - center) * std::sqrt(2.0);
  const double farthest = center * std::sqrt(2.0);
  const double span = farthest - nearest;
  Tensor m({size, size}, 1.0f);
  if (span <= 0.0) return m;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double d = std::hypot(static_cast<double>(r) - center, static_cast<double>(c) - center);
      m.at(r, c) = static_cast<float>(1.0 - (1.0 - floor) * (d - nearest) / span);
    }
  }
  return m;
}

SaliencyMap top_down(const std::array<Tensor, 4>& per_layer, const FusionConfig& config,
                     BackwardMode mode) {
  const Shape shape{config.output_size, config.output_size};
  for (const auto& t : per_layer) {
    if (t.shape() != shape) throw ShapeError("top_down: per-layer map " + to_string(t.shape()) + " expected " + to_string(shape));
  }
  const Tensor bias = config.center_bias ? center_bias_map(config.output_size, config.center_bias_floor)
                                         : Tensor(shape, 1.0f);
  SaliencyMap out{Tensor(shape), Stage::TopDown, mode, "none"};
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double acc = 0.0;
    for (std::size_t n = 0; n < per_layer.size(); ++n) {
      acc += static_cast<double>(config.layer_weights[n]) * per_layer[n][i];
    }
    out.values[i] = static_cast<float>(bias[i] * acc);
  }
  return out;
}

SaliencyMap modulate(const SaliencyMap& td, const Tensor& bu, std::string bottom_up_source) {
  require_same_shape(td.values, bu, "modulate");
  for (float v : bu.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument("modulate: bottom-up value " + std::to_string(v) + " outside [0, 1]");
    }
  }
  SaliencyMap out{td.values, Stage::Modulated, td.mode, std::move(bottom_up_source)};
  for (std::size_t i = 0; i < bu.size(); ++i) out.values[i] = td.values[i] * std::exp(bu[i]);
  return out;
}

SaliencyMap normalize(const SaliencyMap& s, float eta) {
  if (!(eta > 0.0f)) throw std::invalid_argument("normalize: eta must be > 0");
  const double peak = max_value(s.values);
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  double mean = 0.0;
  for (float v : s.values.data()) mean += v * scale;
  mean /= static_cast<double>(s.values.size());

  constexpr float lo = std::numeric_limits<float>::denorm_min();
  const float hi = std::nextafter(1.0f, 0.0f);
  SaliencyMap out{Tensor(s.values.shape()), Stage::Normalized, s.mode, s.bottom_up};
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double x = static_cast<double>(s.values[i]) * scale - mean;
    const double y = 1.0 / (1.0 + std::exp(-static_cast<double>(eta) * x));
    out.values[i] = std::clamp(static_cast<float>(y), lo, hi);
  }
  return out;
}

Tensor input_sensitivity(const Network& net, const ActivationCache& cache, const Tensor& initial) {
  BackwardOptions opts;
  opts.mode = BackwardMode::BP;
  opts.first_boundary = net.blocks.size() - 1;
  opts.to_input = true;
  const BackwardBundle bundle = backward(net, cache, initial, opts);
  const Tensor& g = *bundle.input_gradient;
  const std::size_t channels = g.dim(0), h = g.dim(1), w = g.dim(2), plane = h * w;
  Tensor out({h, w});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out[i] = std::max(out[i], std::abs(g[c * plane + i]));
  }
  return out;
}

Tensor bps_baseline(const Network& net, const ActivationCache& cache, const FusionConfig& config,
                    std::optional<std::size_t> one_hot) {
  Tensor map = gaussian_blur(input_sensitivity(net, cache, initial_gradient(cache, one_hot)),
                             config.blur_size, config.blur_sigma);
  const float peak = max_value(map);
  if (peak > 0.0f) {
    for (float& v : map.data()) v /= peak;
  }
  return map;
}

}  // namespace salnet
