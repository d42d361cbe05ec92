#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "salnet/archive.hpp"
#include "salnet/backward.hpp"
#include "salnet/image_io.hpp"
#include "salnet/network.hpp"

namespace salnet {

inline constexpr std::size_t kInputSize = 224;
inline constexpr std::size_t kNumClasses = 1000;

/// The four places where forward and backward cues are read out. Each is
/// identified by the tensor that enters it: pool2, pool3, pool4 and pool5
/// outputs respectively.
enum class SubModule { Conv3, Conv4, Conv5, Fc };

inline constexpr std::array<SubModule, 4> kSubModules = {SubModule::Conv3, SubModule::Conv4,
                                                         SubModule::Conv5, SubModule::Fc};

const char* to_string(SubModule m);

/// Index of the VGG16 block whose pooled output feeds `m`.
std::size_t input_block(SubModule m);

/// Block index of the shallowest sub-module input (pool2).
inline constexpr std::size_t kFirstSubModuleBlock = 1;

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// The 32 VGG16 parameter tensors (13 conv and 3 fc layers, weight and bias
/// each), conv1_1.weight ... fc8.bias.
const std::vector<ParamSpec>& vgg16_parameter_specs();

/// Per-output-channel preprocessing:
/// out[c] = (rgb[channel_order[c]] - means[c]) * scales[c], rgb in 0..255.
struct Preprocessing {
  std::array<std::size_t, 3> channel_order{2, 1, 0};
  std::array<float, 3> means{103.939f, 116.779f, 123.68f};
  std::array<float, 3> scales{1.0f, 1.0f, 1.0f};
};

/// Reads meta/channel_order, meta/channel_means and meta/channel_scale from
/// the archive, falling back to the classic BGR mean-subtraction convention.
Preprocessing preprocessing_from(const WeightArchive& archive);

struct Vgg16Model {
  Network net;
  Preprocessing preprocessing;
};

class Vgg16ValidationError : public std::runtime_error {
 public:
  explicit Vgg16ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Builds the network iff every parameter is present with its exact shape;
/// otherwise throws Vgg16ValidationError listing every missing or
/// mis-shaped tensor.
Vgg16Model validate_vgg16(const WeightArchive& archive);
/// As above, but moves the parameter tensors out of the archive.
Vgg16Model validate_vgg16(WeightArchive&& archive);

/// Assembles a VGG16 Network from tensors already known to be well-shaped.
Network make_vgg16(std::vector<Tensor> params_in_spec_order);

/// Bilinear resize to 224 x 224 followed by channel reorder, mean subtraction
/// and scaling.
Tensor preprocess(const Image& image, const Preprocessing& prep);

const Tensor& submodule_input(const ActivationCache& cache, SubModule m);
const Tensor& submodule_gradient(const BackwardBundle& bundle, SubModule m);

/// Backward options for the four sub-module gradients of VGG16.
BackwardOptions submodule_backward_options(BackwardMode mode);

/// Indices of the k largest scores, descending.
std::vector<std::size_t> top_k(const Tensor& scores, std::size_t k);

}  // namespace salnet
