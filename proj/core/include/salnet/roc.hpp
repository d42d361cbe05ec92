#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "salnet/tensor.hpp"

namespace salnet {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Saliency in [0,1] paired with a strictly binary mask of the same shape.
struct EvalPair {
  Tensor saliency;
  Tensor mask;  // values in {0, 1}

  /// Throws EvalError unless shapes match, the mask is binary and holds at
  /// least one positive and one negative pixel.
  void validate() const;
};

struct RocPoint {
  double fpr;
  double tpr;
};

struct RocResult {
  std::vector<RocPoint> points;  // sorted by (fpr, tpr), from (0,0) to (1,1)
  double auc = 0.0;
};

inline constexpr std::size_t kDefaultThresholds = 256;

/// Sweeps `levels` uniform thresholds t_k = k / (levels - 1); a pixel is
/// predicted positive when saliency >= t_k. AUC is the trapezoid over the
/// sorted points with (0,0) and (1,1) appended.
RocResult roc_curve(const EvalPair& pair, std::size_t levels = kDefaultThresholds);

/// P(s_pos > s_neg) + 0.5 P(s_pos == s_neg) by exhaustive enumeration.
double auc_pairwise_oracle(const EvalPair& pair);

/// Nearest-neighbour resize, then binarize at 0.5 of full range.
Tensor binarize_mask(const Tensor& gray01, std::size_t height, std::size_t width);

struct DatasetRow {
  std::string file;
  double auc;
};

struct DatasetReport {
  std::vector<DatasetRow> rows;
  double mean_auc = 0.0;
  std::vector<std::string> warnings;   // unpaired files
  std::vector<std::string> failures;   // pairs that could not be evaluated
};

/// Pairs files by stem, evaluates each pair, averages per-image AUCs.
/// Throws EvalError when no stems are shared.
DatasetReport eval_dataset(const std::filesystem::path& maps_dir,
                           const std::filesystem::path& gt_dir);

/// "file,auc" rows followed by a "MEAN,<value>" row.
std::string to_csv(const DatasetReport& report);

}  // namespace salnet
