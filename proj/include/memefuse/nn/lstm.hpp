#pragma once

#include "memefuse/nn/layers.hpp"

namespace memefuse::nn {

// Bidirectional LSTM over {N,L,I}. `units` counts cells per direction, so the
// concatenated output width is 2*units. With return_sequences the output is
// {N,L,2U} (backward states aligned to original positions); otherwise {N,2U}
// from the final processing step of each direction. No masking: padded steps
// are consumed like any other input.
class BiLstm : public Layer {
public:
  BiLstm(long input_dim, long units, bool return_sequences, Rng& rng);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
  void zero_grad() override;
  const char* kind() const override { return "bilstm"; }
  long units() const { return units_; }

private:
  struct Direction {
    RowMatrixXf Wx, Wh, gWx, gWh;
    Eigen::VectorXf b, gb;
    // Per processing step s: gate activations and states.
    std::vector<RowMatrixXf> i, f, g, o, c, tanh_c, h;

    void init(long input_dim, long units, Rng& rng);
    void run(const Tensor& x, bool reverse, long units);
    // dh_extern is indexed by processing step; accumulates into dx.
    void back(const Tensor& x, bool reverse, long units,
              const std::vector<RowMatrixXf>& dh_extern, Tensor& dx);
    void params(const std::string& prefix, std::vector<ParamRef>& out);
    void zero();
  };

  long in_, units_;
  bool return_seq_;
  Direction fwd_, bwd_;
  Tensor x_cache_;
};

}  // namespace memefuse::nn
