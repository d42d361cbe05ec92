#include "salnet/backward.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace salnet {

const char* to_string(BackwardMode mode) {
  switch (mode) {
    case BackwardMode::BP: return "bp";
    case BackwardMode::FG: return "fg";
    case BackwardMode::PG: return "pg";
  }
  return "?";
}

BackwardMode parse_backward_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "bp") return BackwardMode::BP;
  if (lower == "fg") return BackwardMode::FG;
  if (lower == "pg") return BackwardMode::PG;
  throw std::invalid_argument("unknown backward mode '" + std::string(text) + "' (expected bp|fg|pg)");
}

const Tensor& BackwardBundle::at_block(std::size_t block) const {
  if (block < first_boundary || block - first_boundary >= boundaries.size()) {
    throw std::out_of_range("no recorded gradient for block " + std::to_string(block));
  }
  return boundaries[block - first_boundary];
}

Tensor initial_gradient(const ActivationCache& cache, std::optional<std::size_t> one_hot) {
  if (!one_hot) return cache.scores;
  if (*one_hot >= cache.scores.size()) {
    throw std::out_of_range("one-hot class " + std::to_string(*one_hot) + " outside " +
                            std::to_string(cache.scores.size()) + " classes");
  }
  Tensor g(cache.scores.shape());
  g[*one_hot] = 1.0f;
  return g;
}

namespace {

Tensor softmax_vjp(const Tensor& probs, const Tensor& upstream) {
  double dot = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) dot += static_cast<double>(probs[i]) * upstream[i];
  Tensor g(probs.shape());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    g[i] = static_cast<float>(probs[i] * (upstream[i] - dot));
  }
  return g;
}

void check_cache(const Network& net, const ActivationCache& cache) {
  bool ok = cache.block_outputs.size() == net.blocks.size() &&
            cache.pool_indices.size() == net.blocks.size() &&
            cache.conv_masks.size() == net.blocks.size() &&
            cache.fc_masks.size() + 1 == net.classifier.size() &&
            cache.logits.size() == net.classifier.back().weights.dim(0);
  for (std::size_t b = 0; ok && b < net.blocks.size(); ++b) {
    ok = cache.conv_masks[b].size() == net.blocks[b].convs.size();
  }
  if (!ok) throw std::invalid_argument("backward: activation cache does not match network");
}

}  // namespace

BackwardBundle backward(const Network& net, const ActivationCache& cache, const Tensor& initial,
                        const BackwardOptions& options) {
  check_cache(net, cache);
  if (initial.shape() != cache.logits.shape()) {
    throw ShapeError("backward: initial gradient " + to_string(initial.shape()) +
                     " does not match logits " + to_string(cache.logits.shape()));
  }
  if (options.first_boundary >= net.blocks.size()) {
    throw std::invalid_argument("backward: first_boundary beyond last block");
  }
  const bool guided = options.mode == BackwardMode::FG;
  const bool clamp_boundaries = options.mode != BackwardMode::BP;
  auto notify = [&](const std::string& layer, const Tensor& g) {
    if (options.observer) options.observer(layer, g);
  };

  BackwardBundle bundle;
  bundle.mode = options.mode;
  bundle.first_boundary = options.first_boundary;

  Tensor g = options.through_softmax ? softmax_vjp(cache.scores, initial) : initial;
  for (std::size_t i = net.classifier.size(); i-- > 0;) {
    g = fc_backward_input(g, net.classifier[i].weights);
    if (i > 0) {
      g = relu_backward(g, cache.fc_masks[i - 1], guided);
      notify(net.classifier[i - 1].name + "/relu", g);
    }
  }
  g = g.reshaped(cache.block_outputs.back().shape());

  for (std::size_t b = net.blocks.size(); b-- > 0;) {
    if (b >= options.first_boundary) {
      if (clamp_boundaries) g = clamp_nonnegative(g);
      bundle.boundaries.push_back(g);
      if (b == options.first_boundary && !options.to_input) break;
    }
    g = maxpool_backward(g, cache.pool_indices[b]);
    const auto& convs = net.blocks[b].convs;
    for (std::size_t j = convs.size(); j-- > 0;) {
      g = relu_backward(g, cache.conv_masks[b][j], guided);
      notify(convs[j].name + "/relu", g);
      g = conv2d_backward_input(g, convs[j].weights, 1);
    }
  }
  std::reverse(bundle.boundaries.begin(), bundle.boundaries.end());
  if (options.to_input) bundle.input_gradient = std::move(g);
  return bundle;
}

}  // namespace salnet
