#pragma once

#include <string>
#include <vector>

#include "salnet/ops.hpp"
#include "salnet/tensor.hpp"

namespace salnet {

struct ConvLayer {
  std::string name;
  Tensor weights;  // C_out x C_in x 3 x 3
  Tensor bias;     // C_out
};

struct FcLayer {
  std::string name;
  Tensor weights;  // out x in
  Tensor bias;     // out
};

/// Convolutions (each followed by a ReLU) closed by one 2x2 max-pool.
struct ConvBlock {
  std::vector<ConvLayer> convs;
};

/// A plain VGG-style classifier: conv blocks, then a stack of fully
/// connected layers with a ReLU after every layer but the last, then softmax.
struct Network {
  Shape input_shape;  // C x H x W
  std::vector<ConvBlock> blocks;
  std::vector<FcLayer> classifier;

  /// Propagates shapes through the graph; throws ShapeError on any mismatch.
  /// Returns the output shape of every block.
  std::vector<Shape> check() const;
};

/// Everything the backward engine and the fusion stage need from a forward pass.
struct ActivationCache {
  Tensor input;
  std::vector<Tensor> block_outputs;           // pooled output of each block
  std::vector<std::vector<Tensor>> conv_masks;  // [block][conv] ReLU sign masks
  std::vector<PoolIndexMap> pool_indices;      // one per block
  std::vector<Tensor> fc_masks;                // one per hidden fc layer
  Tensor logits;
  Tensor scores;  // softmax(logits)
};

ActivationCache forward(const Network& net, const Tensor& input);

}  // namespace salnet
