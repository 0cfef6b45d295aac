#include "msad/classifier.hpp"

#include <stdexcept>

#include "msad/ops.hpp"

namespace msad {

Prototypes text_prototypes(const Tensor& text_normal, const Tensor& text_abnormal,
                           Tape* tape) {
  if (text_normal.rank() != 2 || text_abnormal.rank() != 2 ||
      text_normal.shape() != text_abnormal.shape()) {
    throw std::invalid_argument("text_prototypes: both branches must be [N_t x D]");
  }
  return {mean_axis(text_normal, 0, tape), mean_axis(text_abnormal, 0, tape)};
}

Tensor anomaly_probs(const Tensor& class_feature, const Prototypes& protos, Tape* tape) {
  Tensor logit_n = dot(class_feature, protos.normal, tape);
  Tensor logit_a = dot(class_feature, protos.abnormal, tape);
  Tensor logits = concat_axis(logit_n, logit_a, 0, tape);
  return softmax(logits, 0, tape);
}

Tensor anomaly_score(const Tensor& class_feature, const Prototypes& protos, Tape* tape) {
  return slice_axis(anomaly_probs(class_feature, protos, tape), 0, 1, 1, tape);
}

}  // namespace msad
