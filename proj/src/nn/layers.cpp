#include "memefuse/nn/layers.hpp"

#include <cmath>

namespace memefuse::nn {

float glorot_limit(long fan_in, long fan_out) {
  return std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
}

void glorot_fill(float* data, long size, long fan_in, long fan_out, Rng& rng) {
  const float limit = glorot_limit(fan_in, fan_out);
  std::uniform_real_distribution<float> dist(-limit, limit);
  for (long i = 0; i < size; ++i) data[i] = dist(rng);
}

// ---------------------------------------------------------------- Dense

Dense::Dense(long in, long out, Rng& rng) {
  W_.resize(in, out);
  gW_ = RowMatrixXf::Zero(in, out);
  b_ = Eigen::VectorXf::Zero(out);
  gb_ = Eigen::VectorXf::Zero(out);
  glorot_fill(W_.data(), W_.size(), in, out, rng);
}

Tensor Dense::forward(const Tensor& x, bool) {
  if (x.rank() != 2 || x.dim(1) != W_.rows())
    throw Error(Errc::ShapeMismatch, "dense expects {N," + std::to_string(W_.rows()) +
                                         "}, got " + shape_str(x.shape()));
  x_cache_ = x;
  const long n = x.dim(0);
  Tensor y({n, W_.cols()});
  y.mat2().noalias() = x.mat2() * W_;
  y.mat2().rowwise() += b_.transpose();
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const long n = x_cache_.dim(0);
  auto x = x_cache_.mat2();
  auto g = dy.mat(n, W_.cols());
  gW_.noalias() += x.transpose() * g;
  gb_ += g.colwise().sum().transpose();
  Tensor dx({n, W_.rows()});
  dx.mat2().noalias() = g * W_.transpose();
  return dx;
}

void Dense::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "/W", W_.data(), gW_.data(), W_.size(), true});
  out.push_back({prefix + "/b", b_.data(), gb_.data(), b_.size(), true});
}

void Dense::zero_grad() {
  gW_.setZero();
  gb_.setZero();
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x, bool) {
  x_cache_ = x;
  Tensor y = x;
  float* d = y.data();
  for (long i = 0; i < y.numel(); ++i) d[i] = d[i] > 0.0f ? d[i] : 0.0f;
  return y;
}

Tensor Relu::backward(const Tensor& dy) {
  Tensor dx = dy;
  const float* x = x_cache_.data();
  float* d = dx.data();
  for (long i = 0; i < dx.numel(); ++i)
    if (x[i] <= 0.0f) d[i] = 0.0f;
  return dx;
}

// ---------------------------------------------------------------- Sigmoid

Tensor Sigmoid::forward(const Tensor& x, bool) {
  Tensor y = x;
  float* d = y.data();
  for (long i = 0; i < y.numel(); ++i) d[i] = 1.0f / (1.0f + std::exp(-d[i]));
  y_cache_ = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  Tensor dx = dy;
  const float* y = y_cache_.data();
  float* d = dx.data();
  for (long i = 0; i < dx.numel(); ++i) d[i] *= y[i] * (1.0f - y[i]);
  return dx;
}

// ---------------------------------------------------------------- Conv2D

Conv2D::Conv2D(long in_channels, long out_channels, long kernel, Rng& rng)
    : cin_(in_channels), cout_(out_channels), k_(kernel) {
  const long rows = k_ * k_ * cin_;
  W_.resize(rows, cout_);
  gW_ = RowMatrixXf::Zero(rows, cout_);
  b_ = Eigen::VectorXf::Zero(cout_);
  gb_ = Eigen::VectorXf::Zero(cout_);
  glorot_fill(W_.data(), W_.size(), rows, k_ * k_ * cout_, rng);
}

void Conv2D::im2col(const float* img, long h, long w, RowMatrixXf& col) const {
  const long oh = h - k_ + 1, ow = w - k_ + 1;
  col.resize(oh * ow, k_ * k_ * cin_);
  for (long i = 0; i < oh; ++i) {
    for (long j = 0; j < ow; ++j) {
      float* row = col.data() + (i * ow + j) * col.cols();
      for (long di = 0; di < k_; ++di) {
        const float* src = img + ((i + di) * w + j) * cin_;
        std::copy(src, src + k_ * cin_, row + di * k_ * cin_);
      }
    }
  }
}

Tensor Conv2D::forward(const Tensor& x, bool) {
  if (x.rank() != 4 || x.dim(3) != cin_)
    throw Error(Errc::ShapeMismatch, "conv2d expects {N,H,W," + std::to_string(cin_) +
                                         "}, got " + shape_str(x.shape()));
  const long n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const long oh = h - k_ + 1, ow = w - k_ + 1;
  if (oh <= 0 || ow <= 0)
    throw Error(Errc::ShapeMismatch, "conv2d input smaller than kernel");
  x_cache_ = x;
  Tensor y({n, oh, ow, cout_});
  RowMatrixXf col;
  const long ins = h * w * cin_, outs = oh * ow * cout_;
  for (long s = 0; s < n; ++s) {
    im2col(x.data() + s * ins, h, w, col);
    MatMap out(y.data() + s * outs, oh * ow, cout_);
    out.noalias() = col * W_;
    out.rowwise() += b_.transpose();
  }
  return y;
}

Tensor Conv2D::backward(const Tensor& dy) {
  const long n = x_cache_.dim(0), h = x_cache_.dim(1), w = x_cache_.dim(2);
  const long oh = h - k_ + 1, ow = w - k_ + 1;
  Tensor dx({n, h, w, cin_});
  RowMatrixXf col, dcol;
  const long ins = h * w * cin_, outs = oh * ow * cout_;
  for (long s = 0; s < n; ++s) {
    ConstMatMap g(dy.data() + s * outs, oh * ow, cout_);
    im2col(x_cache_.data() + s * ins, h, w, col);
    gW_.noalias() += col.transpose() * g;
    gb_ += g.colwise().sum().transpose();
    dcol.noalias() = g * W_.transpose();
    float* dimg = dx.data() + s * ins;
    for (long i = 0; i < oh; ++i) {
      for (long j = 0; j < ow; ++j) {
        const float* row = dcol.data() + (i * ow + j) * dcol.cols();
        for (long di = 0; di < k_; ++di) {
          float* dst = dimg + ((i + di) * w + j) * cin_;
          const float* src = row + di * k_ * cin_;
          for (long t = 0; t < k_ * cin_; ++t) dst[t] += src[t];
        }
      }
    }
  }
  return dx;
}

void Conv2D::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "/W", W_.data(), gW_.data(), W_.size(), true});
  out.push_back({prefix + "/b", b_.data(), gb_.data(), b_.size(), true});
}

void Conv2D::zero_grad() {
  gW_.setZero();
  gb_.setZero();
}

// ---------------------------------------------------------------- MaxPool2D

Tensor MaxPool2D::forward(const Tensor& x, bool) {
  if (x.rank() != 4)
    throw Error(Errc::ShapeMismatch, "maxpool expects rank-4, got " + shape_str(x.shape()));
  const long n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const long oh = h / 2, ow = w / 2;
  in_shape_ = x.shape();
  Tensor y({n, oh, ow, c});
  argmax_.assign(static_cast<size_t>(y.numel()), 0);
  const float* in = x.data();
  float* out = y.data();
  long o = 0;
  for (long s = 0; s < n; ++s) {
    const long base = s * h * w * c;
    for (long i = 0; i < oh; ++i) {
      for (long j = 0; j < ow; ++j) {
        for (long ch = 0; ch < c; ++ch, ++o) {
          long best = base + (2 * i * w + 2 * j) * c + ch;
          float bv = in[best];
          const long cand[3] = {base + (2 * i * w + 2 * j + 1) * c + ch,
                                base + ((2 * i + 1) * w + 2 * j) * c + ch,
                                base + ((2 * i + 1) * w + 2 * j + 1) * c + ch};
          for (long idx : cand) {
            if (in[idx] > bv) {
              bv = in[idx];
              best = idx;
            }
          }
          out[o] = bv;
          argmax_[static_cast<size_t>(o)] = static_cast<int>(best);
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2D::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  float* d = dx.data();
  const float* g = dy.data();
  for (long o = 0; o < dy.numel(); ++o) d[argmax_[static_cast<size_t>(o)]] += g[o];
  return dx;
}

// ---------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, bool) {
  in_shape_ = x.shape();
  return x.reshaped({x.dim(0), x.numel() / std::max<long>(x.dim(0), 1)});
}

Tensor Flatten::backward(const Tensor& dy) { return dy.reshaped(in_shape_); }

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(float rate, Rng* rng) : rate_(rate), rng_(rng) {
  if (rate < 0.0f || rate >= 1.0f)
    throw Error(Errc::InvalidArgument, "dropout rate must be in [0,1)");
}

Tensor Dropout::forward(const Tensor& x, bool training) {
  active_ = training && rate_ > 0.0f;
  if (!active_) return x;
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  const float keep = 1.0f - rate_;
  mask_.resize(static_cast<size_t>(x.numel()));
  Tensor y = x;
  float* d = y.data();
  for (long i = 0; i < y.numel(); ++i) {
    const float m = dist(*rng_) < keep ? 1.0f / keep : 0.0f;
    mask_[static_cast<size_t>(i)] = m;
    d[i] *= m;
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (!active_) return dy;
  Tensor dx = dy;
  float* d = dx.data();
  for (long i = 0; i < dx.numel(); ++i) d[i] *= mask_[static_cast<size_t>(i)];
  return dx;
}

// ---------------------------------------------------------------- GlobalAvgPool2D

Tensor GlobalAvgPool2D::forward(const Tensor& x, bool) {
  if (x.rank() != 4)
    throw Error(Errc::ShapeMismatch, "gap expects rank-4, got " + shape_str(x.shape()));
  in_shape_ = x.shape();
  const long n = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  Tensor y({n, c});
  auto out = y.mat2();
  out.setZero();
  const float* in = x.data();
  for (long s = 0; s < n; ++s)
    for (long p = 0; p < hw; ++p)
      for (long ch = 0; ch < c; ++ch) out(s, ch) += in[(s * hw + p) * c + ch];
  out /= static_cast<float>(hw);
  return y;
}

Tensor GlobalAvgPool2D::backward(const Tensor& dy) {
  const long n = in_shape_[0], hw = in_shape_[1] * in_shape_[2], c = in_shape_[3];
  Tensor dx(in_shape_);
  float* d = dx.data();
  auto g = dy.mat(n, c);
  const float scale = 1.0f / static_cast<float>(hw);
  for (long s = 0; s < n; ++s)
    for (long p = 0; p < hw; ++p)
      for (long ch = 0; ch < c; ++ch) d[(s * hw + p) * c + ch] = g(s, ch) * scale;
  return dx;
}

// ---------------------------------------------------------------- MeanPoolSeq

Tensor MeanPoolSeq::forward(const Tensor& x, bool) {
  if (x.rank() != 3)
    throw Error(Errc::ShapeMismatch, "mean pool expects rank-3, got " + shape_str(x.shape()));
  in_shape_ = x.shape();
  const long n = x.dim(0), l = x.dim(1), d = x.dim(2);
  Tensor y({n, d});
  auto out = y.mat2();
  out.setZero();
  for (long s = 0; s < n; ++s) {
    ConstMatMap seq(x.data() + s * l * d, l, d);
    out.row(s) = seq.colwise().mean();
  }
  return y;
}

Tensor MeanPoolSeq::backward(const Tensor& dy) {
  const long n = in_shape_[0], l = in_shape_[1], d = in_shape_[2];
  Tensor dx(in_shape_);
  auto g = dy.mat(n, d);
  const float scale = 1.0f / static_cast<float>(l);
  for (long s = 0; s < n; ++s) {
    MatMap seq(dx.data() + s * l * d, l, d);
    seq.rowwise() = g.row(s) * scale;
  }
  return dx;
}

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool training) {
  if (record_) recorded_.assign(layers_.size(), Tensor());
  Tensor h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (record_) recorded_[i] = h;
    h = layers_[i]->forward(h, training);
  }
  return h;
}

Tensor Sequential::forward_from(size_t k, const Tensor& x, bool training) {
  Tensor h = x;
  for (size_t i = k; i < layers_.size(); ++i) h = layers_[i]->forward(h, training);
  return h;
}

Tensor Sequential::backward(const Tensor& dy, size_t skip_tail) {
  Tensor g = dy;
  for (size_t i = layers_.size() - skip_tail; i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

void Sequential::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  for (size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect_params(prefix + "/" + std::to_string(i) + "_" + layers_[i]->kind(), out);
}

void Sequential::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

size_t Sequential::last_index_of(const char* kind) const {
  for (size_t i = layers_.size(); i-- > 0;)
    if (std::string(layers_[i]->kind()) == kind) return i;
  return static_cast<size_t>(-1);
}

// ---------------------------------------------------------------- Embedding

Embedding::Embedding(long vocab_size, long dim, long max_len, bool positional, Rng& rng)
    : positional_(positional) {
  table_.resize(vocab_size, dim);
  gtable_ = RowMatrixXf::Zero(vocab_size, dim);
  glorot_fill(table_.data(), table_.size(), vocab_size, dim, rng);
  if (positional_) {
    pos_.resize(max_len, dim);
    gpos_ = RowMatrixXf::Zero(max_len, dim);
    glorot_fill(pos_.data(), pos_.size(), max_len, dim, rng);
  }
}

Tensor Embedding::forward(const std::vector<std::vector<int>>& ids) {
  ids_cache_ = ids;
  const long n = static_cast<long>(ids.size());
  const long l = n > 0 ? static_cast<long>(ids[0].size()) : 0;
  const long d = table_.cols();
  Tensor y({n, l, d});
  float* out = y.data();
  for (long s = 0; s < n; ++s) {
    if (static_cast<long>(ids[static_cast<size_t>(s)].size()) != l)
      throw Error(Errc::ShapeMismatch, "ragged token batch");
    for (long t = 0; t < l; ++t) {
      const int id = ids[static_cast<size_t>(s)][static_cast<size_t>(t)];
      if (id < 0 || id >= table_.rows())
        throw Error(Errc::InvalidArgument, "token id " + std::to_string(id) + " out of range");
      Eigen::Map<Eigen::RowVectorXf> row(out + (s * l + t) * d, d);
      row = table_.row(id);
      if (positional_) row += pos_.row(t);
    }
  }
  return y;
}

void Embedding::backward(const Tensor& dy) {
  const long n = dy.dim(0), l = dy.dim(1), d = dy.dim(2);
  const float* g = dy.data();
  for (long s = 0; s < n; ++s) {
    for (long t = 0; t < l; ++t) {
      const int id = ids_cache_[static_cast<size_t>(s)][static_cast<size_t>(t)];
      Eigen::Map<const Eigen::RowVectorXf> row(g + (s * l + t) * d, d);
      gtable_.row(id) += row;
      if (positional_) gpos_.row(t) += row;
    }
  }
}

void Embedding::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "/table", table_.data(), gtable_.data(), table_.size(), true});
  if (positional_)
    out.push_back({prefix + "/pos", pos_.data(), gpos_.data(), pos_.size(), true});
}

void Embedding::zero_grad() {
  gtable_.setZero();
  if (positional_) gpos_.setZero();
}

}  // namespace memefuse::nn
