#include "msad/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "msad/classifier.hpp"

namespace msad {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

Tensor binarize(const Tensor& prediction, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("binarize: threshold must lie in (0,1)");
  }
  Tensor out(prediction.shape());
  const double* d = prediction.data();
  for (std::size_t i = 0; i < prediction.size(); ++i) out[i] = d[i] >= threshold ? 1.0 : 0.0;
  return out;
}

double dice_score_percent(const Tensor& pred_mask, const Tensor& truth_mask) {
  if (pred_mask.shape() != truth_mask.shape()) {
    throw std::invalid_argument("dice_score: shape mismatch " + shape_str(pred_mask.shape()) +
                                " vs " + shape_str(truth_mask.shape()));
  }
  std::uint64_t p = 0, m = 0, both = 0;
  const double* pd = pred_mask.data();
  const double* md = truth_mask.data();
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const bool in_p = pd[i] != 0.0;
    const bool in_m = md[i] != 0.0;
    p += in_p;
    m += in_m;
    both += in_p && in_m;
  }
  if (p + m == 0) return 100.0;  // correct all-negative prediction
  return 100.0 * 2.0 * static_cast<double>(both) / static_cast<double>(p + m);
}

double accuracy_percent(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.empty()) throw std::invalid_argument("accuracy: empty set");
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("accuracy: length mismatch");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double pixel_pauc_percent(const std::vector<double>& scores,
                          const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("pixel_pauc: scores/labels length mismatch");
  }
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::uint8_t l : labels) (l ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument(
        "pixel_pauc: need at least one positive and one negative pixel");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks within tie groups (Mann-Whitney tie handling)
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return 100.0 * u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::array<double, 5> threshold_sweep(const std::vector<Tensor>& predictions,
                                      const std::vector<Tensor>& masks) {
  if (predictions.size() != masks.size()) {
    throw std::invalid_argument("threshold_sweep: batch sizes disagree");
  }
  std::array<double, 5> result{};
  for (std::size_t t = 0; t < kSweepThresholds.size(); ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      acc += dice_score_percent(binarize(predictions[i], kSweepThresholds[t]), masks[i]);
    }
    result[t] = predictions.empty() ? 0.0 : acc / static_cast<double>(predictions.size());
  }
  return result;
}

std::string MetricsReport::to_text() const {
  std::string s;
  s += "dice_percent: " + fmt(dice_percent) + "\n";
  s += "accuracy_percent: " + fmt(accuracy_percent) + "\n";
  s += "pauc_percent: " + fmt(pauc_percent) + "\n";
  s += "tp_pixels: " + std::to_string(tp_pixels) + "\n";
  s += "fp_pixels: " + std::to_string(fp_pixels) + "\n";
  s += "fn_pixels: " + std::to_string(fn_pixels) + "\n";
  for (std::size_t t = 0; t < kSweepThresholds.size(); ++t) {
    char key[48];
    std::snprintf(key, sizeof(key), "threshold_%.1f_dice", kSweepThresholds[t]);
    s += std::string(key) + ": " + fmt(sweep_dice[t]) + "\n";
  }
  return s;
}

std::string MetricsReport::sweep_table_tsv() const {
  std::string header, row;
  for (std::size_t t = 0; t < kSweepThresholds.size(); ++t) {
    if (t) {
      header += '\t';
      row += '\t';
    }
    char key[16];
    std::snprintf(key, sizeof(key), "t=%.1f", kSweepThresholds[t]);
    header += key;
    row += fmt(sweep_dice[t]);
  }
  return header + "\n" + row + "\n";
}

MetricsReport compute_metrics(const std::vector<Tensor>& predictions,
                              const std::vector<Tensor>& masks,
                              const std::vector<double>& image_scores,
                              const std::vector<int>& image_labels) {
  if (predictions.size() != masks.size() || predictions.size() != image_scores.size() ||
      predictions.size() != image_labels.size()) {
    throw std::invalid_argument("compute_metrics: input lengths disagree");
  }
  MetricsReport report;
  report.sweep_dice = threshold_sweep(predictions, masks);
  report.dice_percent = report.sweep_dice[2];  // 0.5 column is the headline number

  std::vector<int> predicted_labels(image_scores.size());
  for (std::size_t i = 0; i < image_scores.size(); ++i) {
    predicted_labels[i] = predicted_abnormal(image_scores[i]) ? 1 : 0;
  }
  report.accuracy_percent = accuracy_percent(predicted_labels, image_labels);

  std::vector<double> pixel_scores;
  std::vector<std::uint8_t> pixel_labels;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    Tensor hard = binarize(predictions[i], kDefaultThreshold);
    const double* pd = hard.data();
    const double* md = masks[i].data();
    const double* sd = predictions[i].data();
    for (std::size_t k = 0; k < hard.size(); ++k) {
      const bool p = pd[k] != 0.0, m = md[k] != 0.0;
      report.tp_pixels += p && m;
      report.fp_pixels += p && !m;
      report.fn_pixels += !p && m;
      pixel_scores.push_back(sd[k]);
      pixel_labels.push_back(m ? 1 : 0);
    }
  }
  report.pauc_percent = pixel_pauc_percent(pixel_scores, pixel_labels);
  return report;
}

}  // namespace msad
