#include "salnet/vgg16.hpp"

#include <algorithm>
#include <numeric>

namespace salnet {

const char* to_string(SubModule m) {
  switch (m) {
    case SubModule::Conv3: return "conv3";
    case SubModule::Conv4: return "conv4";
    case SubModule::Conv5: return "conv5";
    case SubModule::Fc: return "fc";
  }
  return "?";
}

std::size_t input_block(SubModule m) {
  switch (m) {
    case SubModule::Conv3: return 1;
    case SubModule::Conv4: return 2;
    case SubModule::Conv5: return 3;
    case SubModule::Fc: return 4;
  }
  throw std::invalid_argument("bad sub-module");
}

namespace {

struct BlockSpec {
  std::size_t channels;
  std::size_t convs;
};

constexpr std::array<BlockSpec, 5> kBlocks = {{{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}}};
constexpr std::array<std::size_t, 3> kFcWidths = {4096, 4096, kNumClasses};

std::vector<ParamSpec> build_specs() {
  std::vector<ParamSpec> specs;
  std::size_t in = 3;
  for (std::size_t b = 0; b < kBlocks.size(); ++b) {
    for (std::size_t j = 0; j < kBlocks[b].convs; ++j) {
      const std::string base = "conv" + std::to_string(b + 1) + "_" + std::to_string(j + 1);
      specs.push_back({base + ".weight", {kBlocks[b].channels, in, 3, 3}});
      specs.push_back({base + ".bias", {kBlocks[b].channels}});
      in = kBlocks[b].channels;
    }
  }
  std::size_t width = 512 * 7 * 7;
  for (std::size_t i = 0; i < kFcWidths.size(); ++i) {
    const std::string base = "fc" + std::to_string(i + 6);
    specs.push_back({base + ".weight", {kFcWidths[i], width}});
    specs.push_back({base + ".bias", {kFcWidths[i]}});
    width = kFcWidths[i];
  }
  return specs;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "; ") + s;
  return out;
}

}  // namespace

const std::vector<ParamSpec>& vgg16_parameter_specs() {
  static const std::vector<ParamSpec> specs = build_specs();
  return specs;
}

Preprocessing preprocessing_from(const WeightArchive& archive) {
  Preprocessing prep;
  auto load3 = [&](const char* name, auto& dst, auto convert) {
    const Tensor* t = archive.find(name);
    if (!t) return;
    if (t->size() != 3) throw ShapeError(std::string(name) + " must hold 3 values, got " + to_string(t->shape()));
    for (std::size_t i = 0; i < 3; ++i) dst[i] = convert((*t)[i]);
  };
  load3("meta/channel_order", prep.channel_order, [](float v) {
    if (v != 0.0f && v != 1.0f && v != 2.0f) throw ShapeError("meta/channel_order entries must be 0, 1 or 2");
    return static_cast<std::size_t>(v);
  });
  load3("meta/channel_means", prep.means, [](float v) { return v; });
  load3("meta/channel_scale", prep.scales, [](float v) { return v; });
  return prep;
}

Vgg16ValidationError::Vgg16ValidationError(std::vector<std::string> problems)
    : std::runtime_error("archive is not a valid VGG16 checkpoint: " + join(problems)),
      problems_(std::move(problems)) {}

namespace {

Preprocessing check_vgg16(const WeightArchive& archive) {
  std::vector<std::string> problems;
  for (const auto& spec : vgg16_parameter_specs()) {
    const Tensor* t = archive.find(spec.name);
    if (!t) {
      problems.push_back("missing " + spec.name);
    } else if (t->shape() != spec.shape) {
      problems.push_back(spec.name + " has shape " + to_string(t->shape()) + ", expected " +
                         to_string(spec.shape));
    }
  }
  Preprocessing prep;
  try {
    prep = preprocessing_from(archive);
  } catch (const ShapeError& e) {
    problems.emplace_back(e.what());
  }
  if (!problems.empty()) throw Vgg16ValidationError(std::move(problems));
  return prep;
}

}  // namespace

Vgg16Model validate_vgg16(const WeightArchive& archive) {
  const Preprocessing prep = check_vgg16(archive);
  std::vector<Tensor> params;
  for (const auto& spec : vgg16_parameter_specs()) params.push_back(archive.at(spec.name));
  return {make_vgg16(std::move(params)), prep};
}

Vgg16Model validate_vgg16(WeightArchive&& archive) {
  const Preprocessing prep = check_vgg16(archive);
  std::vector<Tensor> params;
  for (const auto& spec : vgg16_parameter_specs()) params.push_back(archive.extract(spec.name));
  return {make_vgg16(std::move(params)), prep};
}

Network make_vgg16(std::vector<Tensor> params) {
  const auto& specs = vgg16_parameter_specs();
  if (params.size() != specs.size()) {
    throw std::invalid_argument("make_vgg16: expected " + std::to_string(specs.size()) + " tensors");
  }
  auto layer_name = [&](std::size_t i) { return specs[i].name.substr(0, specs[i].name.find('.')); };
  Network net;
  net.input_shape = {3, kInputSize, kInputSize};
  std::size_t p = 0;
  for (const auto& block : kBlocks) {
    ConvBlock cb;
    for (std::size_t j = 0; j < block.convs; ++j, p += 2) {
      cb.convs.push_back({layer_name(p), std::move(params[p]), std::move(params[p + 1])});
    }
    net.blocks.push_back(std::move(cb));
  }
  for (std::size_t i = 0; i < kFcWidths.size(); ++i, p += 2) {
    net.classifier.push_back({layer_name(p), std::move(params[p]), std::move(params[p + 1])});
  }
  const auto shapes = net.check();
  const std::array<Shape, 5> expected = {Shape{64, 112, 112}, Shape{128, 56, 56}, Shape{256, 28, 28},
                                         Shape{512, 14, 14}, Shape{512, 7, 7}};
  for (std::size_t b = 0; b < expected.size(); ++b) {
    if (shapes[b] != expected[b]) throw ShapeError("VGG16 shape schedule violated at block " + std::to_string(b + 1));
  }
  return net;
}

Tensor preprocess(const Image& image, const Preprocessing& prep) {
  if (image.channels != 3) throw ImageError("preprocess: expected an RGB image");
  const Tensor planar = to_planar(image);
  const std::size_t h = image.height, w = image.width, plane = kInputSize * kInputSize;
  Tensor out({3, kInputSize, kInputSize});
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src = prep.channel_order[c];
    Tensor channel({h, w}, std::vector<float>(planar.raw() + src * h * w, planar.raw() + (src + 1) * h * w));
    const Tensor resized = resize_bilinear(channel, kInputSize, kInputSize);
    float* dst = out.raw() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (resized[i] - prep.means[c]) * prep.scales[c];
  }
  return out;
}

const Tensor& submodule_input(const ActivationCache& cache, SubModule m) {
  return cache.block_outputs.at(input_block(m));
}

const Tensor& submodule_gradient(const BackwardBundle& bundle, SubModule m) {
  return bundle.at_block(input_block(m));
}

BackwardOptions submodule_backward_options(BackwardMode mode) {
  BackwardOptions opts;
  opts.mode = mode;
  opts.first_boundary = kFirstSubModuleBlock;
  return opts;
}

std::vector<std::size_t> top_k(const Tensor& scores, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  idx.resize(k);
  return idx;
}

}  // namespace salnet
