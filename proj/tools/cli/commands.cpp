#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "salnet/archive.hpp"
#include "salnet/fusion.hpp"
#include "salnet/image_io.hpp"
#include "salnet/pipeline.hpp"
#include "salnet/roc.hpp"
#include "salnet/vgg16.hpp"

namespace salnet::cli {
namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Vgg16Model load_model(const std::filesystem::path& weights) {
  try {
    return validate_vgg16(read_archive(weights));
  } catch (const std::exception& e) {
    throw ConfigError("cannot use weights " + weights.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot create " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Tensor rescale_for_view(const Tensor& map) {
  Tensor v = clamp_nonnegative(map);
  const float peak = max_value(v);
  if (peak > 0.0f) {
    for (float& x : v.data()) x /= peak;
  }
  return v;
}

void dump_stages(const std::filesystem::path& dir, const std::string& stem, const PipelineResult& r) {
  std::filesystem::create_directories(dir);
  WeightArchive raw;
  for (std::size_t n = 0; n < kSubModules.size(); ++n) {
    const std::string name = to_string(kSubModules[n]);
    write_gray_png(dir / (stem + "_" + name + ".png"), rescale_for_view(r.per_layer[n]));
    raw.add("stage/" + name, r.per_layer[n]);
  }
  write_gray_png(dir / (stem + "_topdown.png"), rescale_for_view(r.top_down.values));
  write_gray_png(dir / (stem + "_modulated.png"), rescale_for_view(r.modulated.values));
  raw.add("stage/topdown", r.top_down.values);
  raw.add("stage/modulated", r.modulated.values);
  raw.add("stage/normalized", r.normalized.values);
  write_archive(raw, dir / (stem + "_stages.salw"));
}

std::string format_times(const StageTimes& t) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << "preprocess " << t.preprocess << "s, forward " << t.forward
     << "s, backward " << t.backward << "s, fusion " << t.fusion << "s, bottom-up " << t.bottom_up
     << "s, normalize " << t.normalize << "s, total " << t.total() << "s";
  return os.str();
}

struct ImageOutcome {
  bool ok = false;
  std::string message;
};

ImageOutcome process_one(const Vgg16Model& model, const RunConfig& config, std::size_t index) {
  const auto& input = config.inputs[index];
  ImageOutcome outcome;
  try {
    const Image image = read_image(input);
    const auto out_path = config.output_for(index);
    if (!out_path.parent_path().empty()) std::filesystem::create_directories(out_path.parent_path());
    std::ostringstream msg;
    if (config.bps) {
      const auto start = std::chrono::steady_clock::now();
      const ActivationCache cache = forward(model.net, preprocess(image, model.preprocessing));
      const Tensor map = bps_baseline(model.net, cache, config.pipeline.fusion, config.pipeline.one_hot);
      write_gray_png(out_path, map);
      msg << input.string() << " -> " << out_path.string();
      if (config.time) {
        msg << " [bps " << std::fixed << std::setprecision(3)
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << "s]";
      }
    } else {
      const PipelineResult r = run_pipeline(model, image, config.pipeline);
      write_gray_png(out_path, r.normalized.values);
      if (!config.dump_stages.empty()) dump_stages(config.dump_stages, input.stem().string(), r);
      msg << input.string() << " -> " << out_path.string();
      if (config.time) msg << " [" << format_times(r.times) << "]";
    }
    write_text(sidecar_path(out_path), describe_effective_config(config, input));
    outcome.ok = true;
    outcome.message = msg.str();
  } catch (const std::exception& e) {
    outcome.message = "error: " + input.string() + ": " + e.what();
  }
  return outcome;
}

void add_fusion_flags(CLI::App* cmd, RunConfig& config, std::string& layer_weights, std::string& mode,
                      std::string& bottom_up, bool& no_center_bias, long& one_hot) {
  auto& f = config.pipeline.fusion;
  cmd->add_option("--weights", config.weights, "SALW archive with VGG16 parameters")->required();
  cmd->add_option("--mode", mode, "Backward mode: bp | fg | pg")->capture_default_str();
  cmd->add_option("--bottom-up", bottom_up, "Bottom-up map: mr | file:<path> | none")->capture_default_str();
  cmd->add_option("--layer-weights", layer_weights, "Weights for conv3,conv4,conv5,fc")->capture_default_str();
  cmd->add_option("--eta", f.eta, "Sigmoid sharpness of the final normalization")->capture_default_str();
  cmd->add_option("--blur-size", f.blur_size, "Odd Gaussian kernel size")->capture_default_str();
  cmd->add_option("--blur-sigma", f.blur_sigma, "Gaussian sigma")->capture_default_str();
  cmd->add_option("--center-bias-floor", f.center_bias_floor, "Center-bias value at the corners")->capture_default_str();
  cmd->add_flag("--no-center-bias", no_center_bias, "Disable the center-bias prior");
  cmd->add_flag("--through-softmax", config.pipeline.through_softmax,
                "Apply the softmax Jacobian to the initial gradient");
  cmd->add_option("--one-hot", one_hot, "Use e_k instead of the score vector as initial gradient");
  cmd->add_option("--mr-alpha", config.pipeline.manifold_ranking.alpha, "Manifold-ranking alpha")->capture_default_str();
  cmd->add_option("--mr-sigma2", config.pipeline.manifold_ranking.sigma2, "Manifold-ranking color sigma^2")->capture_default_str();
  cmd->add_option("--mr-grid", config.pipeline.manifold_ranking.grid, "Manifold-ranking grid side")->capture_default_str();
  cmd->add_flag("--time", config.time, "Print per-stage wall time");
}

void finish_fusion_flags(RunConfig& config, const std::string& layer_weights, const std::string& mode,
                         const std::string& bottom_up, bool no_center_bias, long one_hot) {
  try {
    config.pipeline.mode = parse_backward_mode(mode);
    config.pipeline.bottom_up = BottomUpSource::parse(bottom_up);
    config.pipeline.fusion.layer_weights = parse_layer_weights(layer_weights);
    config.pipeline.fusion.center_bias = !no_center_bias;
    if (one_hot >= 0) config.pipeline.one_hot = static_cast<std::size_t>(one_hot);
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

int run_images(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  Vgg16Model model;
  try {
    model = load_model(config.weights);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  std::vector<ImageOutcome> outcomes(config.inputs.size());
  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, config.inputs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < config.inputs.size(); i = next++) outcomes[i] = process_one(model, config, i);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  bool failed = false;
  for (const auto& o : outcomes) {
    (o.ok ? out : err) << o.message << '\n';
    failed |= !o.ok;
  }
  return failed ? kFileFailures : kSuccess;
}

int eval_maps(const std::filesystem::path& maps, const std::filesystem::path& gt,
              const std::filesystem::path& csv, std::ostream& out, std::ostream& err) {
  DatasetReport report;
  try {
    report = eval_dataset(maps, gt);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  for (const auto& f : report.failures) err << "error: " << f << '\n';
  const std::string text = to_csv(report);
  try {
    if (!csv.empty()) write_text(csv, text);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFileFailures;
  }
  out << "evaluated " << report.rows.size() << " pairs, mean AUC " << std::fixed << std::setprecision(6)
      << report.mean_auc << '\n';
  return report.failures.empty() && !report.rows.empty() ? kSuccess : kFileFailures;
}

int compare_modes(const RunConfig& config, std::ostream& out, std::ostream& err) {
  if (config.inputs.size() != 1) {
    err << "error: compare-modes takes exactly one image\n";
    return kConfigError;
  }
  Vgg16Model model;
  try {
    model = load_model(config.weights);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const auto& input = config.inputs.front();
  try {
    const Image image = read_image(input);
    const ActivationCache cache = forward(model.net, preprocess(image, model.preprocessing));
    const Tensor bu = compute_bottom_up(image, config.pipeline);
    std::filesystem::create_directories(config.out);
    for (BackwardMode mode : {BackwardMode::BP, BackwardMode::FG, BackwardMode::PG}) {
      RunConfig per_mode = config;
      per_mode.pipeline.mode = mode;
      const PipelineResult r = saliency_from_cache(model.net, cache, bu, per_mode.pipeline);
      const auto path = config.out / (input.stem().string() + "_" + to_string(mode) + ".png");
      write_gray_png(path, r.normalized.values);
      write_text(sidecar_path(path), describe_effective_config(per_mode, input));
      const Tensor& m = r.modulated.values;
      out << to_string(mode) << ": min=" << std::setprecision(6) << min_value(m) << " max=" << max_value(m)
          << " mean=" << mean_value(m) << " -> " << path.string() << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << input.string() << ": " << e.what() << '\n';
    return kFileFailures;
  }
  return kSuccess;
}

int inspect_weights(const std::filesystem::path& path, std::ostream& out, std::ostream& err) {
  WeightArchive archive;
  try {
    archive = read_archive(path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  out << path.string() << ": SALW version " << archive.version() << ", " << archive.size() << " tensors\n";
  for (const auto& [name, tensor] : archive.entries()) out << "  " << name << ' ' << to_string(tensor.shape()) << '\n';
  try {
    const Vgg16Model model = validate_vgg16(archive);
    const auto& p = model.preprocessing;
    out << "VGG16: valid; channel order " << p.channel_order[0] << ',' << p.channel_order[1] << ','
        << p.channel_order[2] << "; means " << p.means[0] << ',' << p.means[1] << ',' << p.means[2] << '\n';
    return kSuccess;
  } catch (const Vgg16ValidationError& e) {
    out << "VGG16: invalid\n";
    for (const auto& problem : e.problems()) out << "  " << problem << '\n';
    return kFileFailures;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Top-down + bottom-up saliency detection on VGG16"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  std::string layer_weights = "1,5,10,1", mode = "pg", bottom_up = "mr";
  bool no_center_bias = false;
  long one_hot = -1;
  auto* run = app.add_subcommand("run", "Compute saliency maps for one or more images");
  add_fusion_flags(run, run_cfg, layer_weights, mode, bottom_up, no_center_bias, one_hot);
  run->add_option("inputs", run_cfg.inputs, "Input images")->required();
  run->add_option("--out", run_cfg.out, "Output PNG (single input) or directory")->required();
  run->add_option("--dump-stages", run_cfg.dump_stages, "Directory for per-layer/top-down/modulated maps");
  run->add_option("--threads", run_cfg.threads, "Worker threads (0 = all cores)")->capture_default_str();
  run->add_flag("--bps", run_cfg.bps, "Gradient-to-image baseline instead of the fused model");

  RunConfig cmp_cfg;
  std::string cmp_layer_weights = "1,5,10,1", cmp_mode = "pg", cmp_bottom_up = "mr";
  bool cmp_no_center_bias = false;
  long cmp_one_hot = -1;
  std::filesystem::path cmp_image;
  auto* cmp = app.add_subcommand("compare-modes", "Run bp, fg and pg on one image with a shared forward pass");
  add_fusion_flags(cmp, cmp_cfg, cmp_layer_weights, cmp_mode, cmp_bottom_up, cmp_no_center_bias, cmp_one_hot);
  cmp->add_option("image", cmp_image, "Input image")->required();
  cmp->add_option("--out-dir,--out", cmp_cfg.out, "Output directory")->required();

  std::filesystem::path maps_dir, gt_dir, csv;
  auto* eval = app.add_subcommand("eval", "ROC/AUC of saliency maps against ground-truth masks");
  eval->add_option("--maps", maps_dir, "Directory of saliency maps")->required();
  eval->add_option("--gt", gt_dir, "Directory of ground-truth masks")->required();
  eval->add_option("--out", csv, "CSV output (file,auc ... MEAN)");

  std::filesystem::path inspect_path;
  auto* inspect = app.add_subcommand("inspect-weights", "List and validate a SALW archive");
  inspect->add_option("path", inspect_path, "SALW archive")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (*run) {
      finish_fusion_flags(run_cfg, layer_weights, mode, bottom_up, no_center_bias, one_hot);
      return run_images(run_cfg, out, err);
    }
    if (*cmp) {
      cmp_cfg.inputs = {cmp_image};
      finish_fusion_flags(cmp_cfg, cmp_layer_weights, cmp_mode, cmp_bottom_up, cmp_no_center_bias, cmp_one_hot);
      return compare_modes(cmp_cfg, out, err);
    }
    if (*eval) return eval_maps(maps_dir, gt_dir, csv, out, err);
    if (*inspect) return inspect_weights(inspect_path, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace salnet::cli
