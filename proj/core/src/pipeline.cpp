#include "salnet/pipeline.hpp"

#include <chrono>
#include <stdexcept>

namespace salnet {
namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

BottomUpSource BottomUpSource::parse(const std::string& text) {
  if (text == "mr") return {Kind::ManifoldRanking, {}};
  if (text == "none") return {Kind::None, {}};
  if (text.rfind("file:", 0) == 0 && text.size() > 5) return {Kind::File, text.substr(5)};
  throw std::invalid_argument("bottom-up source must be mr, none or file:<path>, got '" + text + "'");
}

std::string BottomUpSource::describe() const {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::ManifoldRanking: return "mr";
    case Kind::File: return "file:" + path.string();
  }
  return "?";
}

Tensor compute_bottom_up(const Image& image, const PipelineOptions& options) {
  const std::size_t size = options.fusion.output_size;
  switch (options.bottom_up.kind) {
    case BottomUpSource::Kind::None:
      return Tensor({size, size});
    case BottomUpSource::Kind::ManifoldRanking: {
      ManifoldRankingConfig mr = options.manifold_ranking;
      mr.output_size = size;
      return bottom_up_saliency(image, mr);
    }
    case BottomUpSource::Kind::File:
      return load_external_map(options.bottom_up.path, size);
  }
  throw std::logic_error("unhandled bottom-up source");
}

PipelineResult saliency_from_cache(const Network& net, const ActivationCache& cache,
                                   const Tensor& bottom_up, const PipelineOptions& options) {
  options.fusion.validate();
  if (net.blocks.size() != 5) {
    throw std::invalid_argument("saliency_from_cache: network must have five conv blocks");
  }
  PipelineResult result;
  Stopwatch clock;

  BackwardOptions bopts = submodule_backward_options(options.mode);
  bopts.through_softmax = options.through_softmax;
  const BackwardBundle bundle = backward(net, cache, initial_gradient(cache, options.one_hot), bopts);
  result.times.backward = clock.lap();

  for (std::size_t n = 0; n < kSubModules.size(); ++n) {
    const SubModule m = kSubModules[n];
    result.per_layer[n] = sublayer_saliency(submodule_input(cache, m), submodule_gradient(bundle, m), options.fusion);
  }
  result.top_down = top_down(result.per_layer, options.fusion, options.mode);
  result.times.fusion = clock.lap();

  result.modulated = modulate(result.top_down, bottom_up, options.bottom_up.describe());
  // Signed BP maps are clamped at zero before the sigmoid; PG/FG maps are already >= 0.
  SaliencyMap to_normalize = result.modulated;
  if (options.mode == BackwardMode::BP) to_normalize.values = clamp_nonnegative(to_normalize.values);
  result.normalized = normalize(to_normalize, options.fusion.eta);
  result.times.normalize = clock.lap();
  return result;
}

PipelineResult run_pipeline(const Vgg16Model& model, const Image& image, const PipelineOptions& options) {
  Stopwatch clock;
  const Tensor input = preprocess(image, model.preprocessing);
  const double t_pre = clock.lap();
  const ActivationCache cache = forward(model.net, input);
  const double t_fwd = clock.lap();
  const Tensor bu = compute_bottom_up(image, options);
  const double t_bu = clock.lap();
  PipelineResult result = saliency_from_cache(model.net, cache, bu, options);
  result.times.preprocess = t_pre;
  result.times.forward = t_fwd;
  result.times.bottom_up = t_bu;
  return result;
}

}  // namespace salnet
