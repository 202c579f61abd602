#include "memefuse/nn/attention.hpp"

#include <cmath>

namespace memefuse::nn {

SelfAttention::SelfAttention(long dim, Rng& rng) : dim_(dim) {
  auto setup = [&](RowMatrixXf& W, RowMatrixXf& gW, Eigen::VectorXf& b, Eigen::VectorXf& gb) {
    W.resize(dim, dim);
    gW = RowMatrixXf::Zero(dim, dim);
    b = Eigen::VectorXf::Zero(dim);
    gb = Eigen::VectorXf::Zero(dim);
    glorot_fill(W.data(), W.size(), dim, dim, rng);
  };
  setup(Wq_, gWq_, bq_, gbq_);
  setup(Wk_, gWk_, bk_, gbk_);
  setup(Wv_, gWv_, bv_, gbv_);
  setup(Wo_, gWo_, bo_, gbo_);
}

Tensor SelfAttention::forward(const Tensor& x, bool) {
  if (x.rank() != 3 || x.dim(2) != dim_)
    throw Error(Errc::ShapeMismatch,
                "attention expects {N,L," + std::to_string(dim_) + "}, got " +
                    shape_str(x.shape()));
  x_cache_ = x;
  const long n = x.dim(0), len = x.dim(1);
  const float scale = 1.0f / std::sqrt(static_cast<float>(dim_));
  q_.assign(static_cast<size_t>(n), {});
  k_.assign(static_cast<size_t>(n), {});
  v_.assign(static_cast<size_t>(n), {});
  a_.assign(static_cast<size_t>(n), {});
  ctx_.assign(static_cast<size_t>(n), {});
  Tensor y(x.shape());
  for (long s = 0; s < n; ++s) {
    auto su = static_cast<size_t>(s);
    ConstMatMap xs(x.data() + s * len * dim_, len, dim_);
    q_[su].noalias() = xs * Wq_;
    q_[su].rowwise() += bq_.transpose();
    k_[su].noalias() = xs * Wk_;
    k_[su].rowwise() += bk_.transpose();
    v_[su].noalias() = xs * Wv_;
    v_[su].rowwise() += bv_.transpose();
    RowMatrixXf scores = (q_[su] * k_[su].transpose()) * scale;
    a_[su].resize(len, len);
    for (long r = 0; r < len; ++r) {
      const float mx = scores.row(r).maxCoeff();
      Eigen::RowVectorXf e = (scores.row(r).array() - mx).exp();
      a_[su].row(r) = e / e.sum();
    }
    ctx_[su].noalias() = a_[su] * v_[su];
    MatMap ys(y.data() + s * len * dim_, len, dim_);
    ys.noalias() = ctx_[su] * Wo_;
    ys.rowwise() += bo_.transpose();
    ys += xs;
  }
  return y;
}

Tensor SelfAttention::backward(const Tensor& dy) {
  const long n = x_cache_.dim(0), len = x_cache_.dim(1);
  const float scale = 1.0f / std::sqrt(static_cast<float>(dim_));
  Tensor dx(x_cache_.shape());
  for (long s = 0; s < n; ++s) {
    auto su = static_cast<size_t>(s);
    ConstMatMap xs(x_cache_.data() + s * len * dim_, len, dim_);
    ConstMatMap gy(dy.data() + s * len * dim_, len, dim_);
    gWo_.noalias() += ctx_[su].transpose() * gy;
    gbo_ += gy.colwise().sum().transpose();
    RowMatrixXf dctx = gy * Wo_.transpose();
    RowMatrixXf da = dctx * v_[su].transpose();
    RowMatrixXf dv = a_[su].transpose() * dctx;
    RowMatrixXf ds(len, len);
    for (long r = 0; r < len; ++r) {
      const float dot = da.row(r).dot(a_[su].row(r));
      ds.row(r) = a_[su].row(r).cwiseProduct((da.row(r).array() - dot).matrix());
    }
    RowMatrixXf dq = ds * k_[su] * scale;
    RowMatrixXf dk = ds.transpose() * q_[su] * scale;
    gWq_.noalias() += xs.transpose() * dq;
    gbq_ += dq.colwise().sum().transpose();
    gWk_.noalias() += xs.transpose() * dk;
    gbk_ += dk.colwise().sum().transpose();
    gWv_.noalias() += xs.transpose() * dv;
    gbv_ += dv.colwise().sum().transpose();
    MatMap gx(dx.data() + s * len * dim_, len, dim_);
    gx.noalias() = dq * Wq_.transpose();
    gx.noalias() += dk * Wk_.transpose();
    gx.noalias() += dv * Wv_.transpose();
    gx += gy;  // residual path
  }
  return dx;
}

void SelfAttention::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "/Wq", Wq_.data(), gWq_.data(), Wq_.size(), true});
  out.push_back({prefix + "/bq", bq_.data(), gbq_.data(), bq_.size(), true});
  out.push_back({prefix + "/Wk", Wk_.data(), gWk_.data(), Wk_.size(), true});
  out.push_back({prefix + "/bk", bk_.data(), gbk_.data(), bk_.size(), true});
  out.push_back({prefix + "/Wv", Wv_.data(), gWv_.data(), Wv_.size(), true});
  out.push_back({prefix + "/bv", bv_.data(), gbv_.data(), bv_.size(), true});
  out.push_back({prefix + "/Wo", Wo_.data(), gWo_.data(), Wo_.size(), true});
  out.push_back({prefix + "/bo", bo_.data(), gbo_.data(), bo_.size(), true});
}

void SelfAttention::zero_grad() {
  gWq_.setZero();
  gWk_.setZero();
  gWv_.setZero();
  gWo_.setZero();
  gbq_.setZero();
  gbk_.setZero();
  gbv_.setZero();
  gbo_.setZero();
}

}  // namespace memefuse::nn
