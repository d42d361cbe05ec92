#include "salnet/roc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "salnet/image_io.hpp"

namespace salnet {

void EvalPair::validate() const {
  if (saliency.shape() != mask.shape()) {
    throw EvalError("saliency " + to_string(saliency.shape()) + " and mask " + to_string(mask.shape()) +
                    " differ in shape");
  }
  std::size_t pos = 0;
  for (float m : mask.data()) {
    if (m != 0.0f && m != 1.0f) throw EvalError("mask is not binary");
    pos += m == 1.0f;
  }
  if (pos == 0) throw EvalError("mask has no positive pixels; rates undefined");
  if (pos == mask.size()) throw EvalError("mask has no negative pixels; rates undefined");
}

RocResult roc_curve(const EvalPair& pair, std::size_t levels) {
  pair.validate();
  if (levels < 2) throw std::invalid_argument("roc_curve: need at least two threshold levels");
  const std::size_t last = levels - 1;
  const auto denom = static_cast<double>(last);
  // hist[k]: pixels whose largest passed threshold index is k (k = levels: none).
  std::vector<std::size_t> pos_hist(levels + 1, 0), neg_hist(levels + 1, 0);
  std::size_t positives = 0, negatives = 0;
  for (std::size_t i = 0; i < pair.saliency.size(); ++i) {
    const double s = pair.saliency[i];
    std::size_t slot = levels;
    if (s >= 0.0) {
      auto k = static_cast<std::ptrdiff_t>(std::floor(std::min(s, 1.0) * denom));
      while (k + 1 <= static_cast<std::ptrdiff_t>(last) && static_cast<double>(k + 1) / denom <= s) ++k;
      while (k >= 0 && static_cast<double>(k) / denom > s) --k;
      if (k >= 0) slot = static_cast<std::size_t>(k);
    }
    if (pair.mask[i] == 1.0f) {
      ++pos_hist[slot];
      ++positives;
    } else {
      ++neg_hist[slot];
      ++negatives;
    }
  }
  RocResult result;
  result.points.push_back({0.0, 0.0});
  result.points.push_back({1.0, 1.0});
  // Pixels passing threshold k are those with slot in [k, last].
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = levels; k-- > 0;) {
    tp += pos_hist[k];
    fp += neg_hist[k];
    result.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                             static_cast<double>(tp) / static_cast<double>(positives)});
  }
  std::sort(result.points.begin(), result.points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
  });
  result.points.erase(std::unique(result.points.begin(), result.points.end(),
                                  [](const RocPoint& a, const RocPoint& b) {
                                    return a.fpr == b.fpr && a.tpr == b.tpr;
                                  }),
                      result.points.end());
  double area = 0.0;
  for (std::size_t i = 1; i < result.points.size(); ++i) {
    const auto& a = result.points[i - 1];
    const auto& b = result.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  result.auc = area;
  return result;
}

double auc_pairwise_oracle(const EvalPair& pair) {
  pair.validate();
  std::vector<float> pos, neg;
  for (std::size_t i = 0; i < pair.saliency.size(); ++i) {
    (pair.mask[i] == 1.0f ? pos : neg).push_back(pair.saliency[i]);
  }
  double wins = 0.0;
  for (float p : pos) {
    for (float n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Tensor binarize_mask(const Tensor& gray01, std::size_t height, std::size_t width) {
  if (gray01.rank() != 2) throw ShapeError("binarize_mask: expected H x W");
  const std::size_t h = gray01.dim(0), w = gray01.dim(1);
  Tensor out({height, width});
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(h - 1, y * h / height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(w - 1, x * w / width);
      out.at(y, x) = gray01.at(sy, sx) >= 0.5f ? 1.0f : 0.0f;
    }
  }
  return out;
}

namespace {

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".pgm" ||
         ext == ".tif" || ext == ".tiff";
}

std::map<std::string, std::filesystem::path> index_by_stem(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw EvalError("not a directory: " + dir.string());
  std::map<std::string, std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    auto [it, inserted] = out.emplace(stem, entry.path());
    if (!inserted && entry.path() < it->second) it->second = entry.path();
  }
  return out;
}

Tensor load_gray01(const std::filesystem::path& path) {
  const Image img = read_image(path, 1);
  Tensor t = to_planar(img).reshaped({img.height, img.width});
  for (float& v : t.data()) v /= 255.0f;
  return t;
}

}  // namespace

DatasetReport eval_dataset(const std::filesystem::path& maps_dir, const std::filesystem::path& gt_dir) {
  const auto maps = index_by_stem(maps_dir);
  const auto gts = index_by_stem(gt_dir);
  DatasetReport report;
  for (const auto& [stem, path] : maps) {
    if (!gts.count(stem)) report.warnings.push_back("no ground truth for " + path.filename().string());
  }
  for (const auto& [stem, path] : gts) {
    if (!maps.count(stem)) report.warnings.push_back("no saliency map for " + path.filename().string());
  }
  bool any_pair = false;
  double total = 0.0;
  for (const auto& [stem, map_path] : maps) {
    auto gt = gts.find(stem);
    if (gt == gts.end()) continue;
    any_pair = true;
    try {
      EvalPair pair;
      pair.saliency = load_gray01(map_path);
      pair.mask = binarize_mask(load_gray01(gt->second), pair.saliency.dim(0), pair.saliency.dim(1));
      const double auc = roc_curve(pair).auc;
      report.rows.push_back({map_path.filename().string(), auc});
      total += auc;
    } catch (const std::exception& e) {
      report.failures.push_back(map_path.filename().string() + ": " + e.what());
    }
  }
  if (!any_pair) throw EvalError("no file stems shared between " + maps_dir.string() + " and " + gt_dir.string());
  if (!report.rows.empty()) report.mean_auc = total / static_cast<double>(report.rows.size());
  return report;
}

std::string to_csv(const DatasetReport& report) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "file,auc\n";
  for (const auto& row : report.rows) os << row.file << ',' << row.auc << '\n';
  os << "MEAN," << report.mean_auc << '\n';
  return os.str();
}

}  // namespace salnet
