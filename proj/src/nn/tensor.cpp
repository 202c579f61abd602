#include "memefuse/nn/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace memefuse::nn {

Tensor::Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
  long n = 1;
  for (long d : shape_) {
    if (d < 0) throw Error(Errc::ShapeMismatch, "negative dimension in " + shape_str(shape_));
    n *= d;
  }
  data_.assign(static_cast<size_t>(n), 0.0f);
}

Tensor Tensor::zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

long Tensor::numel() const { return static_cast<long>(data_.size()); }

MatMap Tensor::mat(long rows, long cols) {
  if (rows * cols != numel())
    throw Error(Errc::ShapeMismatch,
                "cannot view " + shape_str(shape_) + " as " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  return MatMap(data_.data(), rows, cols);
}

ConstMatMap Tensor::mat(long rows, long cols) const {
  if (rows * cols != numel())
    throw Error(Errc::ShapeMismatch,
                "cannot view " + shape_str(shape_) + " as " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  return ConstMatMap(data_.data(), rows, cols);
}

MatMap Tensor::mat2() {
  long rows = shape_.empty() ? 1 : shape_[0];
  return mat(rows, rows == 0 ? 0 : numel() / std::max<long>(rows, 1));
}

ConstMatMap Tensor::mat2() const {
  long rows = shape_.empty() ? 1 : shape_[0];
  return mat(rows, rows == 0 ? 0 : numel() / std::max<long>(rows, 1));
}

Tensor Tensor::reshaped(std::vector<long> shape) const {
  Tensor out(std::move(shape));
  if (out.numel() != numel())
    throw Error(Errc::ShapeMismatch,
                "reshape " + shape_str(shape_) + " -> " + shape_str(out.shape_));
  std::copy(data_.begin(), data_.end(), out.data_.begin());
  return out;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_str(const std::vector<long>& shape) {
  std::ostringstream os;
  os << '{';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << '}';
  return os.str();
}

}  // namespace memefuse::nn
