#include "cli/run_config.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <sstream>
#include <stdexcept>

namespace salnet::cli {

namespace {

bool names_a_png(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".png";
}

}  // namespace

void RunConfig::validate() const {
  if (weights.empty()) throw std::invalid_argument("--weights is required");
  if (inputs.empty()) throw std::invalid_argument("no input images given");
  if (out.empty()) throw std::invalid_argument("--out is required");
  if (inputs.size() > 1 && names_a_png(out)) {
    throw std::invalid_argument("--out must be a directory when more than one input is given");
  }
  if (pipeline.bottom_up.kind == BottomUpSource::Kind::File &&
      !std::filesystem::exists(pipeline.bottom_up.path)) {
    throw std::invalid_argument("bottom-up map does not exist: " + pipeline.bottom_up.path.string());
  }
  if (pipeline.one_hot && *pipeline.one_hot >= kNumClasses) {
    throw std::invalid_argument("--one-hot class must be below " + std::to_string(kNumClasses));
  }
  pipeline.fusion.validate();
  if (!(pipeline.manifold_ranking.alpha > 0.0 && pipeline.manifold_ranking.alpha < 1.0)) {
    throw std::invalid_argument("--mr-alpha must lie in (0, 1)");
  }
  if (!(pipeline.manifold_ranking.sigma2 > 0.0)) throw std::invalid_argument("--mr-sigma2 must be > 0");
  if (pipeline.manifold_ranking.grid < 2) throw std::invalid_argument("--mr-grid must be >= 2");
}

std::filesystem::path RunConfig::output_for(std::size_t index) const {
  if (inputs.size() == 1 && names_a_png(out)) return out;
  return out / (inputs.at(index).stem().string() + ".png");
}

std::array<float, 4> parse_layer_weights(const std::string& text) {
  std::array<float, 4> w{};
  std::stringstream ss(text);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == 4) throw std::invalid_argument("--layer-weights takes exactly four values");
    std::size_t used = 0;
    try {
      w[n] = std::stof(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("bad layer weight '" + item + "'");
    if (w[n] < 0.0f) throw std::invalid_argument("layer weights must be >= 0");
    ++n;
  }
  if (n != 4) throw std::invalid_argument("--layer-weights takes exactly four values");
  return w;
}

std::string describe_effective_config(const RunConfig& config, const std::filesystem::path& input) {
  const auto& p = config.pipeline;
  const auto& f = p.fusion;
  nlohmann::ordered_json j;
  j["input"] = input.string();
  j["weights"] = config.weights.string();
  j["method"] = config.bps ? "bps" : to_string(p.mode);
  j["bottom_up"] = p.bottom_up.describe();
  j["layer_weights"] = {f.layer_weights[0], f.layer_weights[1], f.layer_weights[2], f.layer_weights[3]};
  j["blur_size"] = f.blur_size;
  j["blur_sigma"] = f.blur_sigma;
  j["eta"] = f.eta;
  j["center_bias"] = f.center_bias;
  j["center_bias_floor"] = f.center_bias_floor;
  j["output_size"] = f.output_size;
  j["through_softmax"] = p.through_softmax;
  j["initial_gradient"] = p.one_hot ? "one-hot:" + std::to_string(*p.one_hot) : std::string("scores");
  j["mr_grid"] = p.manifold_ranking.grid;
  j["mr_alpha"] = p.manifold_ranking.alpha;
  j["mr_sigma2"] = p.manifold_ranking.sigma2;
  return j.dump(2) + "\n";
}

std::filesystem::path sidecar_path(const std::filesystem::path& output) {
  auto p = output;
  p.replace_extension(".json");
  return p;
}

}  // namespace salnet::cli
