#include "memefuse/nn/lstm.hpp"

#include <cmath>

namespace memefuse::nn {

namespace {

inline RowMatrixXf sigmoid_of(const RowMatrixXf& z) {
  return z.unaryExpr([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
}

inline RowMatrixXf tanh_of(const RowMatrixXf& z) {
  return z.unaryExpr([](float v) { return std::tanh(v); });
}

}  // namespace

void BiLstm::Direction::init(long input_dim, long units, Rng& rng) {
  Wx.resize(input_dim, 4 * units);
  Wh.resize(units, 4 * units);
  gWx = RowMatrixXf::Zero(input_dim, 4 * units);
  gWh = RowMatrixXf::Zero(units, 4 * units);
  b = Eigen::VectorXf::Zero(4 * units);
  gb = Eigen::VectorXf::Zero(4 * units);
  glorot_fill(Wx.data(), Wx.size(), input_dim, 4 * units, rng);
  glorot_fill(Wh.data(), Wh.size(), units, 4 * units, rng);
  // Forget-gate bias starts at 1 so early training does not wipe the cell.
  b.segment(units, units).setOnes();
}

void BiLstm::Direction::run(const Tensor& x, bool reverse, long units) {
  const long n = x.dim(0), len = x.dim(1), in = x.dim(2);
  i.assign(len, {});
  f.assign(len, {});
  g.assign(len, {});
  o.assign(len, {});
  c.assign(len, {});
  tanh_c.assign(len, {});
  h.assign(len, {});
  RowMatrixXf h_prev = RowMatrixXf::Zero(n, units);
  RowMatrixXf c_prev = RowMatrixXf::Zero(n, units);
  RowMatrixXf xt(n, in), z(n, 4 * units);
  for (long s = 0; s < len; ++s) {
    const long pos = reverse ? len - 1 - s : s;
    for (long r = 0; r < n; ++r)
      xt.row(r) = Eigen::Map<const Eigen::RowVectorXf>(x.data() + (r * len + pos) * in, in);
    z.noalias() = xt * Wx;
    z.noalias() += h_prev * Wh;
    z.rowwise() += b.transpose();
    auto su = static_cast<size_t>(s);
    i[su] = sigmoid_of(z.leftCols(units));
    f[su] = sigmoid_of(z.middleCols(units, units));
    g[su] = tanh_of(z.middleCols(2 * units, units));
    o[su] = sigmoid_of(z.rightCols(units));
    c[su] = f[su].cwiseProduct(c_prev) + i[su].cwiseProduct(g[su]);
    tanh_c[su] = tanh_of(c[su]);
    h[su] = o[su].cwiseProduct(tanh_c[su]);
    h_prev = h[su];
    c_prev = c[su];
  }
}

void BiLstm::Direction::back(const Tensor& x, bool reverse, long units,
                             const std::vector<RowMatrixXf>& dh_extern, Tensor& dx) {
  const long n = x.dim(0), len = x.dim(1), in = x.dim(2);
  RowMatrixXf dh_rec = RowMatrixXf::Zero(n, units);
  RowMatrixXf dc_rec = RowMatrixXf::Zero(n, units);
  const RowMatrixXf zeros = RowMatrixXf::Zero(n, units);
  RowMatrixXf xt(n, in), dz(n, 4 * units);
  for (long s = len - 1; s >= 0; --s) {
    auto su = static_cast<size_t>(s);
    const long pos = reverse ? len - 1 - s : s;
    for (long r = 0; r < n; ++r)
      xt.row(r) = Eigen::Map<const Eigen::RowVectorXf>(x.data() + (r * len + pos) * in, in);
    RowMatrixXf dh = dh_rec;
    if (dh_extern[su].size() > 0) dh += dh_extern[su];
    const RowMatrixXf& c_prev = s > 0 ? c[su - 1] : zeros;
    const RowMatrixXf& h_prev = s > 0 ? h[su - 1] : zeros;
    RowMatrixXf d_o = dh.cwiseProduct(tanh_c[su]);
    RowMatrixXf dc = dc_rec + dh.cwiseProduct(o[su]).cwiseProduct(
                                  (1.0f - tanh_c[su].array().square()).matrix());
    RowMatrixXf d_i = dc.cwiseProduct(g[su]);
    RowMatrixXf d_f = dc.cwiseProduct(c_prev);
    RowMatrixXf d_g = dc.cwiseProduct(i[su]);
    dz.leftCols(units) =
        d_i.cwiseProduct(i[su]).cwiseProduct((1.0f - i[su].array()).matrix());
    dz.middleCols(units, units) =
        d_f.cwiseProduct(f[su]).cwiseProduct((1.0f - f[su].array()).matrix());
    dz.middleCols(2 * units, units) =
        d_g.cwiseProduct((1.0f - g[su].array().square()).matrix());
    dz.rightCols(units) =
        d_o.cwiseProduct(o[su]).cwiseProduct((1.0f - o[su].array()).matrix());
    gWx.noalias() += xt.transpose() * dz;
    gWh.noalias() += h_prev.transpose() * dz;
    gb += dz.colwise().sum().transpose();
    RowMatrixXf dxt = dz * Wx.transpose();
    for (long r = 0; r < n; ++r)
      Eigen::Map<Eigen::RowVectorXf>(dx.data() + (r * len + pos) * in, in) += dxt.row(r);
    dh_rec.noalias() = dz * Wh.transpose();
    dc_rec = dc.cwiseProduct(f[su]);
  }
}

void BiLstm::Direction::params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + "/Wx", Wx.data(), gWx.data(), Wx.size(), true});
  out.push_back({prefix + "/Wh", Wh.data(), gWh.data(), Wh.size(), true});
  out.push_back({prefix + "/b", b.data(), gb.data(), b.size(), true});
}

void BiLstm::Direction::zero() {
  gWx.setZero();
  gWh.setZero();
  gb.setZero();
}

BiLstm::BiLstm(long input_dim, long units, bool return_sequences, Rng& rng)
    : in_(input_dim), units_(units), return_seq_(return_sequences) {
  fwd_.init(input_dim, units, rng);
  bwd_.init(input_dim, units, rng);
}

Tensor BiLstm::forward(const Tensor& x, bool) {
  if (x.rank() != 3 || x.dim(2) != in_)
    throw Error(Errc::ShapeMismatch,
                "bilstm expects {N,L," + std::to_string(in_) + "}, got " + shape_str(x.shape()));
  x_cache_ = x;
  const long n = x.dim(0), len = x.dim(1);
  fwd_.run(x, false, units_);
  bwd_.run(x, true, units_);
  if (return_seq_) {
    Tensor y({n, len, 2 * units_});
    float* out = y.data();
    for (long r = 0; r < n; ++r) {
      for (long pos = 0; pos < len; ++pos) {
        float* dst = out + (r * len + pos) * 2 * units_;
        const auto fs = static_cast<size_t>(pos);            // fwd step == pos
        const auto bs = static_cast<size_t>(len - 1 - pos);  // bwd step for pos
        Eigen::Map<Eigen::RowVectorXf>(dst, units_) = fwd_.h[fs].row(r);
        Eigen::Map<Eigen::RowVectorXf>(dst + units_, units_) = bwd_.h[bs].row(r);
      }
    }
    return y;
  }
  Tensor y({n, 2 * units_});
  auto out = y.mat2();
  const auto last = static_cast<size_t>(len - 1);
  out.leftCols(units_) = fwd_.h[last];
  out.rightCols(units_) = bwd_.h[last];
  return y;
}

Tensor BiLstm::backward(const Tensor& dy) {
  const long n = x_cache_.dim(0), len = x_cache_.dim(1);
  std::vector<RowMatrixXf> dh_fwd(static_cast<size_t>(len));
  std::vector<RowMatrixXf> dh_bwd(static_cast<size_t>(len));
  if (return_seq_) {
    const float* g = dy.data();
    for (long pos = 0; pos < len; ++pos) {
      auto fs = static_cast<size_t>(pos);
      auto bs = static_cast<size_t>(len - 1 - pos);
      dh_fwd[fs].resize(n, units_);
      dh_bwd[bs].resize(n, units_);
      for (long r = 0; r < n; ++r) {
        const float* src = g + (r * len + pos) * 2 * units_;
        dh_fwd[fs].row(r) = Eigen::Map<const Eigen::RowVectorXf>(src, units_);
        dh_bwd[bs].row(r) = Eigen::Map<const Eigen::RowVectorXf>(src + units_, units_);
      }
    }
  } else {
    auto g = dy.mat(n, 2 * units_);
    const auto last = static_cast<size_t>(len - 1);
    dh_fwd[last] = g.leftCols(units_);
    dh_bwd[last] = g.rightCols(units_);
  }
  Tensor dx(x_cache_.shape());
  fwd_.back(x_cache_, false, units_, dh_fwd, dx);
  bwd_.back(x_cache_, true, units_, dh_bwd, dx);
  return dx;
}

void BiLstm::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  fwd_.params(prefix + "/fwd", out);
  bwd_.params(prefix + "/bwd", out);
}

void BiLstm::zero_grad() {
  fwd_.zero();
  bwd_.zero();
}

}  // namespace memefuse::nn
