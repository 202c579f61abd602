#pragma once

#include <memory>
#include <string>
#include <vector>

#include "memefuse/nn/tensor.hpp"

namespace memefuse::nn {

// Flat view of one parameter array. Optimizers update the trainable ones,
// checkpoints serialize all of them by name.
struct ParamRef {
  std::string name;
  float* value = nullptr;
  float* grad = nullptr;
  long size = 0;
  bool trainable = true;
};

float glorot_limit(long fan_in, long fan_out);
void glorot_fill(float* data, long size, long fan_in, long fan_out, Rng& rng);

class Layer {
public:
  virtual ~Layer() = default;
  // Forward pass; layers cache whatever backward() needs.
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  // Given dL/dy, accumulates parameter gradients and returns dL/dx.
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
  virtual void zero_grad() {}
  virtual const char* kind() const = 0;
};

class Dense : public Layer {
public:
  Dense(long in, long out, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void zero_grad() override;
  const char* kind() const override { return "dense"; }
  long in_features() const { return W_.rows(); }
  long out_features() const { return W_.cols(); }
  long param_count() const { return W_.size() + b_.size(); }

private:
  RowMatrixXf W_, gW_;
  Eigen::VectorXf b_, gb_;
  Tensor x_cache_;
};

class Relu : public Layer {
public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "relu"; }

private:
  Tensor x_cache_;
};

class Sigmoid : public Layer {
public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "sigmoid"; }

private:
  Tensor y_cache_;
};

// 2D convolution, 3x3 by default, stride 1, valid padding, NHWC layout.
class Conv2D : public Layer {
public:
  Conv2D(long in_channels, long out_channels, long kernel, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void zero_grad() override;
  const char* kind() const override { return "conv2d"; }
  long param_count() const { return W_.size() + b_.size(); }

private:
  void im2col(const float* img, long h, long w, RowMatrixXf& col) const;
  long cin_, cout_, k_;
  RowMatrixXf W_, gW_;  // (k*k*cin) x cout
  Eigen::VectorXf b_, gb_;
  Tensor x_cache_;
};

// 2x2 max pooling, stride 2, floor semantics on odd sizes. NHWC.
class MaxPool2D : public Layer {
public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "maxpool2d"; }

private:
  std::vector<long> in_shape_;
  std::vector<int> argmax_;
};

class Flatten : public Layer {
public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "flatten"; }

private:
  std::vector<long> in_shape_;
};

// Inverted dropout; identity at inference time.
class Dropout : public Layer {
public:
  Dropout(float rate, Rng* rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "dropout"; }
  float rate() const { return rate_; }

private:
  float rate_;
  Rng* rng_;
  bool active_ = false;
  std::vector<float> mask_;
};

// {N,H,W,C} -> {N,C}, mean over spatial positions.
class GlobalAvgPool2D : public Layer {
public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "global_avg_pool"; }

private:
  std::vector<long> in_shape_;
};

// {N,L,D} -> {N,D}, mean over the sequence axis.
class MeanPoolSeq : public Layer {
public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  const char* kind() const override { return "mean_pool_seq"; }

private:
  std::vector<long> in_shape_;
};

class Sequential {
public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  size_t size() const { return layers_.size(); }
  Layer& layer(size_t i) { return *layers_[i]; }
  const Layer& layer(size_t i) const { return *layers_[i]; }

  Tensor forward(const Tensor& x, bool training);
  // Runs layers [k, end). Clobbers caches; meant for probes, not training.
  Tensor forward_from(size_t k, const Tensor& x, bool training);
  // Backward through layers [0, end-skip_tail).
  Tensor backward(const Tensor& dy, size_t skip_tail = 0);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();

  // When enabled, forward() records the input seen by every layer.
  void record_inputs(bool on) { record_ = on; }
  const Tensor& recorded_input(size_t i) const { return recorded_[i]; }

  // Index of the last layer of the given kind, or npos.
  size_t last_index_of(const char* kind) const;

private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> recorded_;
  bool record_ = false;
};

// Token-id lookup table, optionally with learned positional rows added in.
// Not a Layer: it consumes integer ids, not a float tensor.
class Embedding {
public:
  Embedding(long vocab_size, long dim, long max_len, bool positional, Rng& rng);
  Tensor forward(const std::vector<std::vector<int>>& ids);
  void backward(const Tensor& dy);
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);
  void zero_grad();
  long dim() const { return table_.cols(); }
  long vocab_size() const { return table_.rows(); }

private:
  RowMatrixXf table_, gtable_;
  RowMatrixXf pos_, gpos_;
  bool positional_;
  std::vector<std::vector<int>> ids_cache_;
};

}  // namespace memefuse::nn
