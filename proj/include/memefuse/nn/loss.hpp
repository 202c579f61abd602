#pragma once

#include <Eigen/Core>
#include <vector>

namespace memefuse::nn {

// Mean binary cross-entropy over a batch of troll probabilities, with the
// residual (p - y)/N that is the exact loss gradient with respect to the
// logits feeding a sigmoid (or, with flipped sign on the negative class,
// a two-way softmax).
struct BceResult {
  double loss = 0.0;
  double accuracy = 0.0;  // threshold 0.5
  Eigen::VectorXf residual;
};

BceResult binary_cross_entropy(const Eigen::VectorXf& probs, const std::vector<float>& labels);

}  // namespace memefuse::nn
