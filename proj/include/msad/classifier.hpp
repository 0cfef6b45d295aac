#pragma once

#include "msad/tensor.hpp"

namespace msad {

// Mean text-token embeddings for the normal and abnormal prompt; no extra
// normalization, the classifier consumes raw inner products.
struct Prototypes {
  Tensor normal;    // D
  Tensor abnormal;  // D
};

Prototypes text_prototypes(const Tensor& text_normal, const Tensor& text_abnormal,
                           Tape* tape = nullptr);

// softmax over [f0 . normal, f0 . abnormal] -> {2}
Tensor anomaly_probs(const Tensor& class_feature, const Prototypes& protos,
                     Tape* tape = nullptr);

// the abnormal-component probability S in [0,1] -> {1}
Tensor anomaly_score(const Tensor& class_feature, const Prototypes& protos,
                     Tape* tape = nullptr);

// decision rule for the accuracy metric; a tie at 0.5 resolves to normal
inline bool predicted_abnormal(double score) { return score > 0.5; }

}  // namespace msad
