#include "salnet/network.hpp"

namespace salnet {

std::vector<Shape> Network::check() const {
  if (input_shape.size() != 3) throw ShapeError("network input must be C x H x W");
  if (classifier.empty()) throw ShapeError("network has no classifier layers");
  std::vector<Shape> outputs;
  Shape s = input_shape;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].convs.empty()) throw ShapeError("block " + std::to_string(b) + " has no convolutions");
    for (const auto& conv : blocks[b].convs) {
      const auto& w = conv.weights.shape();
      if (w.size() != 4 || w[2] != 3 || w[3] != 3 || w[1] != s[0]) {
        throw ShapeError(conv.name + ": weights " + to_string(w) + " incompatible with input " +
                         to_string(s));
      }
      if (conv.bias.shape() != Shape{w[0]}) {
        throw ShapeError(conv.name + ": bias " + to_string(conv.bias.shape()) + " expected [" +
                         std::to_string(w[0]) + "]");
      }
      s[0] = w[0];
    }
    if (s[1] % 2 || s[2] % 2) throw ShapeError("block " + std::to_string(b) + " pools odd extents " + to_string(s));
    s[1] /= 2;
    s[2] /= 2;
    outputs.push_back(s);
  }
  std::size_t width = element_count(s);
  for (const auto& fc : classifier) {
    const auto& w = fc.weights.shape();
    if (w.size() != 2 || w[1] != width) {
      throw ShapeError(fc.name + ": weights " + to_string(w) + " expect " +
                       std::to_string(width) + " inputs");
    }
    if (fc.bias.shape() != Shape{w[0]}) {
      throw ShapeError(fc.name + ": bias " + to_string(fc.bias.shape()) + " expected [" +
                       std::to_string(w[0]) + "]");
    }
    width = w[0];
  }
  return outputs;
}

ActivationCache forward(const Network& net, const Tensor& input) {
  if (input.shape() != net.input_shape) {
    throw ShapeError("forward: input " + to_string(input.shape()) + " but network expects " +
                     to_string(net.input_shape));
  }
  ActivationCache cache;
  cache.input = input;
  cache.conv_masks.resize(net.blocks.size());
  Tensor x = input;
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    for (const auto& conv : net.blocks[b].convs) {
      auto relu = relu_forward(conv2d_forward(x, conv.weights, conv.bias, 1));
      cache.conv_masks[b].push_back(std::move(relu.mask));
      x = std::move(relu.output);
    }
    auto pooled = maxpool_forward(x);
    cache.pool_indices.push_back(std::move(pooled.indices));
    cache.block_outputs.push_back(pooled.output);
    x = std::move(pooled.output);
  }
  x = x.reshaped({x.size()});
  for (std::size_t i = 0; i < net.classifier.size(); ++i) {
    const auto& fc = net.classifier[i];
    x = fc_forward(x, fc.weights, fc.bias);
    if (i + 1 < net.classifier.size()) {
      auto relu = relu_forward(x);
      cache.fc_masks.push_back(std::move(relu.mask));
      x = std::move(relu.output);
    }
  }
  cache.logits = x;
  cache.scores = softmax(x);
  return cache;
}

}  // namespace salnet
