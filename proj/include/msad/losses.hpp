#pragma once

#include <vector>

#include "msad/classifier.hpp"
#include "msad/tensor.hpp"

namespace msad {

constexpr double kProbClamp = 1e-7;   // probability clamp before logs
constexpr double kDiceSmooth = 1.0;   // numerator/denominator smoothing
constexpr double kFocalGamma = 2.0;
constexpr double kFocalAlpha = 0.25;

struct LossBreakdown {
  double cls = 0.0;
  double seg = 0.0;
  double seg_dice = 0.0;
  double seg_focal = 0.0;
  double mc = 0.0;
  double total = 0.0;
};

// mean binary cross-entropy over scores in [0,1]; scores are clamped to
// [eps, 1-eps] before the logs
Tensor bce_loss(const std::vector<Tensor>& scores, const std::vector<int>& labels,
                Tape* tape = nullptr);

// soft Dice loss, 1 - (2*sum(G*M)+eps) / (sum G + sum M + eps)
Tensor dice_loss(const Tensor& prediction, const Tensor& mask, Tape* tape = nullptr);

// pixel mean of -alpha_t (1 - p_t)^gamma log p_t
Tensor focal_loss(const Tensor& prediction, const Tensor& mask, double gamma = kFocalGamma,
                  double alpha = kFocalAlpha, Tape* tape = nullptr);

// batch mean of per-image Focal + Dice
Tensor seg_loss(const std::vector<Tensor>& predictions, const std::vector<Tensor>& masks,
                Tape* tape = nullptr);

// margin hinge on cosine similarities against the prototypes;
// sign is +1 for normal (label 0), -1 for abnormal (label 1)
Tensor mc_loss(const std::vector<Tensor>& features, const Prototypes& protos,
               const std::vector<int>& labels, double tau, Tape* tape = nullptr);

// unweighted sum; throws naming the offending term when a part is non-finite
Tensor total_loss(const Tensor& cls, const Tensor& seg, const Tensor& mc,
                  Tape* tape = nullptr);

}  // namespace msad
