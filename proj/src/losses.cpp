#include "msad/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "msad/ops.hpp"

namespace msad {

namespace {

void check_prediction_range(const Tensor& g, const char* op) {
  const double* d = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (d[i] < 0.0 || d[i] > 1.0) {
      throw std::invalid_argument(std::string(op) + ": prediction outside [0,1]");
    }
  }
}

void check_binary_mask(const Tensor& m, const char* op) {
  const double* d = m.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (d[i] != 0.0 && d[i] != 1.0) {
      throw std::invalid_argument(std::string(op) + ": mask must be binary");
    }
  }
}

Tensor batch_mean(std::vector<Tensor> terms, Tape* tape) {
  Tensor acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i], tape);
  return affine(acc, 1.0 / static_cast<double>(terms.size()), 0.0, tape);
}

}  // namespace

Tensor bce_loss(const std::vector<Tensor>& scores, const std::vector<int>& labels,
                Tape* tape) {
  if (scores.empty()) throw std::invalid_argument("bce_loss: empty batch");
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("bce_loss: scores and labels differ in length");
  }
  std::vector<Tensor> terms;
  terms.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Tensor& s = scores[i];
    if (s.size() != 1) throw std::invalid_argument("bce_loss: scores must be scalars");
    check_prediction_range(s, "bce_loss");
    Tensor p = clamp(s, kProbClamp, 1.0 - kProbClamp, tape);
    Tensor term;
    if (labels[i] == 1) {
      term = affine(vlog(p, tape), -1.0, 0.0, tape);
    } else if (labels[i] == 0) {
      term = affine(vlog(affine(p, -1.0, 1.0, tape), tape), -1.0, 0.0, tape);
    } else {
      throw std::invalid_argument("bce_loss: labels must be 0 or 1");
    }
    terms.push_back(term);
  }
  return batch_mean(std::move(terms), tape);
}

Tensor dice_loss(const Tensor& prediction, const Tensor& mask, Tape* tape) {
  if (prediction.shape() != mask.shape()) {
    throw std::invalid_argument("dice_loss: prediction/mask shape mismatch");
  }
  check_prediction_range(prediction, "dice_loss");
  check_binary_mask(mask, "dice_loss");
  double mask_sum = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) mask_sum += mask[i];
  Tensor intersection = sum_all(mul(prediction, mask, tape), tape);
  Tensor numer = affine(intersection, 2.0, kDiceSmooth, tape);
  Tensor denom = affine(sum_all(prediction, tape), 1.0, mask_sum + kDiceSmooth, tape);
  return affine(div_scalar(numer, denom, tape), -1.0, 1.0, tape);
}

Tensor focal_loss(const Tensor& prediction, const Tensor& mask, double gamma, double alpha,
                  Tape* tape) {
  if (prediction.shape() != mask.shape()) {
    throw std::invalid_argument("focal_loss: prediction/mask shape mismatch");
  }
  check_prediction_range(prediction, "focal_loss");
  check_binary_mask(mask, "focal_loss");

  // p_t = G where M = 1, 1 - G elsewhere; alpha_t likewise
  Tensor inv_mask = affine(mask, -1.0, 1.0, tape);
  Tensor p_t = add(mul(prediction, mask, tape),
                   mul(affine(prediction, -1.0, 1.0, tape), inv_mask, tape), tape);
  p_t = clamp(p_t, kProbClamp, 1.0 - kProbClamp, tape);

  Tensor alpha_t(mask.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    alpha_t[i] = mask[i] == 1.0 ? alpha : 1.0 - alpha;
  }
  Tensor modulator = pow_const(affine(p_t, -1.0, 1.0, tape), gamma, tape);
  Tensor weighted = mul(alpha_t, mul(modulator, vlog(p_t, tape), tape), tape);
  return affine(mean_all(weighted, tape), -1.0, 0.0, tape);
}

Tensor seg_loss(const std::vector<Tensor>& predictions, const std::vector<Tensor>& masks,
                Tape* tape) {
  if (predictions.empty()) throw std::invalid_argument("seg_loss: empty batch");
  if (predictions.size() != masks.size()) {
    throw std::invalid_argument("seg_loss: batch sizes disagree");
  }
  std::vector<Tensor> terms;
  terms.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    terms.push_back(add(focal_loss(predictions[i], masks[i], kFocalGamma, kFocalAlpha, tape),
                        dice_loss(predictions[i], masks[i], tape), tape));
  }
  return batch_mean(std::move(terms), tape);
}

Tensor mc_loss(const std::vector<Tensor>& features, const Prototypes& protos,
               const std::vector<int>& labels, double tau, Tape* tape) {
  if (features.empty()) throw std::invalid_argument("mc_loss: empty batch");
  if (features.size() != labels.size()) {
    throw std::invalid_argument("mc_loss: features and labels differ in length");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("mc_loss: margin must be positive");
  std::vector<Tensor> terms;
  terms.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    Tensor s_pos = cosine_similarity(features[i], protos.normal, tape);
    Tensor s_neg = cosine_similarity(features[i], protos.abnormal, tape);
    const double sign = labels[i] == 0 ? 1.0 : -1.0;
    // tau - sign * (s+ - s-)
    Tensor gap = sub(s_pos, s_neg, tape);
    Tensor arg = affine(gap, -sign, tau, tape);
    terms.push_back(relu(arg, tape));
  }
  return batch_mean(std::move(terms), tape);
}

Tensor total_loss(const Tensor& cls, const Tensor& seg, const Tensor& mc, Tape* tape) {
  const char* names[3] = {"l_cls", "l_seg", "l_mc"};
  const Tensor* parts[3] = {&cls, &seg, &mc};
  for (int i = 0; i < 3; ++i) {
    if (parts[i]->size() != 1 || !std::isfinite(parts[i]->value())) {
      throw std::runtime_error(std::string("total_loss: non-finite term ") + names[i]);
    }
  }
  return add(add(cls, seg, tape), mc, tape);
}

}  // namespace msad
