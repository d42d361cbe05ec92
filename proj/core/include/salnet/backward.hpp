#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "salnet/network.hpp"

namespace salnet {

/// BP: plain backprop. FG: every ReLU also drops negative incoming gradient.
/// PG: plain backprop inside blocks, gradient clamped to >= 0 at every
/// recorded block boundary, both where it is stored and where it continues.
enum class BackwardMode { BP, FG, PG };

const char* to_string(BackwardMode mode);
/// Accepts "bp", "fg", "pg" (case-insensitive); throws std::invalid_argument.
BackwardMode parse_backward_mode(std::string_view text);

/// Called with a layer tag and the gradient leaving each ReLU on the way down.
using ReluObserver = std::function<void(const std::string& layer, const Tensor& grad)>;

struct BackwardOptions {
  BackwardMode mode = BackwardMode::PG;
  /// Block outputs with index >= first_boundary are recorded (and clamped in
  /// PG mode). Propagation stops at the first recorded boundary unless
  /// to_input is set.
  std::size_t first_boundary = 0;
  bool to_input = false;
  /// Apply the softmax Jacobian to the initial gradient instead of injecting
  /// it directly at the logits.
  bool through_softmax = false;
  ReluObserver observer;
};

struct BackwardBundle {
  BackwardMode mode = BackwardMode::PG;
  std::size_t first_boundary = 0;
  /// boundaries[i] is the gradient at block_outputs[first_boundary + i].
  std::vector<Tensor> boundaries;
  /// Gradient at the network input; present only when requested.
  std::optional<Tensor> input_gradient;

  const Tensor& at_block(std::size_t block) const;
};

/// The full score vector, or the unit vector e_k when one_hot is given.
Tensor initial_gradient(const ActivationCache& cache, std::optional<std::size_t> one_hot = {});

BackwardBundle backward(const Network& net, const ActivationCache& cache,
                        const Tensor& initial, const BackwardOptions& options);

}  // namespace salnet
