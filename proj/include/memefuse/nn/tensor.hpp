#pragma once

#include <Eigen/Core>
#include <vector>

#include "memefuse/common.hpp"

namespace memefuse::nn {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrixXf>;
using ConstMatMap = Eigen::Map<const RowMatrixXf>;

// Dense float tensor, row-major, rank <= 4. Thin wrapper so layers can view
// the flat storage as whatever Eigen matrix shape they need.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape);
  static Tensor zeros(std::vector<long> shape);

  long rank() const { return static_cast<long>(shape_.size()); }
  long dim(long i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<long>& shape() const { return shape_; }
  long numel() const;
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  // View as rows x cols; rows*cols must equal numel().
  MatMap mat(long rows, long cols);
  ConstMatMap mat(long rows, long cols) const;
  // View as {dim(0), numel()/dim(0)}.
  MatMap mat2();
  ConstMatMap mat2() const;

  Tensor reshaped(std::vector<long> shape) const;

  void fill(float v);

private:
  std::vector<long> shape_;
  std::vector<float> data_;
};

std::string shape_str(const std::vector<long>& shape);

}  // namespace memefuse::nn
