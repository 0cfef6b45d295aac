#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "msad/tensor.hpp"

namespace msad {

constexpr std::array<double, 5> kSweepThresholds{0.3, 0.4, 0.5, 0.6, 0.7};
constexpr double kDefaultThreshold = 0.5;

// pixel >= t maps to 1 (boundary inclusive)
Tensor binarize(const Tensor& prediction, double threshold);

// 100 * 2|P n M| / (|P| + |M|); both sets empty scores 100
double dice_score_percent(const Tensor& pred_mask, const Tensor& truth_mask);

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth);

// rank-based AUROC over pooled pixels, ties count 0.5; needs both classes
double pixel_pauc_percent(const std::vector<double>& scores,
                          const std::vector<std::uint8_t>& labels);

// mean per-image Dice at each sweep threshold, ascending order
std::array<double, 5> threshold_sweep(const std::vector<Tensor>& predictions,
                                      const std::vector<Tensor>& masks);

struct MetricsReport {
  double dice_percent = 0.0;
  double accuracy_percent = 0.0;
  double pauc_percent = 0.0;
  std::array<double, 5> sweep_dice{};
  std::uint64_t tp_pixels = 0;
  std::uint64_t fp_pixels = 0;
  std::uint64_t fn_pixels = 0;

  std::string to_text() const;        // key: value lines
  std::string sweep_table_tsv() const;  // header row + one value row
};

MetricsReport compute_metrics(const std::vector<Tensor>& predictions,
                              const std::vector<Tensor>& masks,
                              const std::vector<double>& image_scores,
                              const std::vector<int>& image_labels);

}  // namespace msad
