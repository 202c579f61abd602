#pragma once

#include "memefuse/nn/layers.hpp"

namespace memefuse::nn {

// Single-head scaled dot-product self-attention with a residual connection:
// Y = softmax(QK'/sqrt(D)) V Wo + X. Operates on {N,L,D}.
class SelfAttention : public Layer {
public:
  SelfAttention(long dim, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void zero_grad() override;
  const char* kind() const override { return "self_attention"; }

private:
  long dim_;
  RowMatrixXf Wq_, Wk_, Wv_, Wo_;
  RowMatrixXf gWq_, gWk_, gWv_, gWo_;
  Eigen::VectorXf bq_, bk_, bv_, bo_;
  Eigen::VectorXf gbq_, gbk_, gbv_, gbo_;
  Tensor x_cache_;
  std::vector<RowMatrixXf> q_, k_, v_, a_, ctx_;
};

}  // namespace memefuse::nn
