#pragma once

#include <cstdint>
#include <vector>

#include "salnet/tensor.hpp"

// Forward and adjoint numeric primitives. Every function is pure: inputs are
// never modified and results are freshly allocated.

namespace salnet {

/// Winner locations of a 2x2/stride-2 max-pool. `indices[i]` is the flat
/// offset into the pooled input of the element that produced output i.
struct PoolIndexMap {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::uint32_t> indices;
};

struct ReluResult {
  Tensor output;
  Tensor mask;  // 1 where input > 0, else 0
};

struct PoolResult {
  Tensor output;
  PoolIndexMap indices;
};

/// Cross-correlation of a C_in x H x W input with C_out x C_in x k x k kernels,
/// stride 1, symmetric zero padding `pad`. Output is C_out x (H+2p-k+1) x (W+2p-k+1).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                      std::size_t pad = 1);

/// Adjoint of conv2d_forward with respect to its input. Bias plays no part.
Tensor conv2d_backward_input(const Tensor& grad_output, const Tensor& kernels,
                             std::size_t pad = 1);

ReluResult relu_forward(const Tensor& x);

/// guided == false: grad * mask. guided == true: additionally zero every
/// negative incoming gradient.
Tensor relu_backward(const Tensor& grad, const Tensor& mask, bool guided);

/// 2x2 window, stride 2; ties go to the first element in row-major order.
PoolResult maxpool_forward(const Tensor& x);

Tensor maxpool_backward(const Tensor& grad, const PoolIndexMap& indices);

/// y = W x + b for W of shape out x in; x may have any shape with `in` elements.
Tensor fc_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

/// W^T grad, returned with length `in`.
Tensor fc_backward_input(const Tensor& grad, const Tensor& weights);

Tensor softmax(const Tensor& x);

/// Bilinear resampling of an H x W map with half-pixel centers and edge clamping.
Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w);

/// Normalized 1-D Gaussian taps of odd length `size`.
std::vector<float> gaussian_kernel(std::size_t size, double sigma);

/// Separable Gaussian blur of an H x W map, replicate border.
Tensor gaussian_blur(const Tensor& map, std::size_t size = 11, double sigma = 2.0);

}  // namespace salnet
