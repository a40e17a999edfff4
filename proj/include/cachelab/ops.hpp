#ifndef CACHELAB_OPS_HPP_
#define CACHELAB_OPS_HPP_

#include <span>
#include <vector>

#include "cachelab/tensor.hpp"

namespace cachelab::ops {

using Vec = std::vector<double>;

void check_shape(bool ok, const char* op);

// y = W x + b. W row-major [out x in].
Vec linear(const Tensor& w, std::span<const double> x, const Tensor* b);
// Accumulates dW, db; returns dx.
Vec linear_backward(const Tensor& w, std::span<const double> x,
                    std::span<const double> dy, Tensor& dw, Tensor* db);

Vec sigmoid(std::span<const double> x);
Vec sigmoid_backward(std::span<const double> y, std::span<const double> dy);

Vec tanh_op(std::span<const double> x);
Vec tanh_backward(std::span<const double> y, std::span<const double> dy);

// Max-subtracted, never NaN for finite inputs.
Vec softmax(std::span<const double> logits);
Vec softmax_backward(std::span<const double> probs, std::span<const double> dprobs);

Vec log_op(std::span<const double> x);  // floors inputs at 1e-12
Vec log_backward(std::span<const double> x, std::span<const double> dy);

double mean_squared_error(std::span<const double> pred, std::span<const double> target);
Vec mean_squared_error_backward(std::span<const double> pred,
                                std::span<const double> target, double dloss);

// out = sum_i weights[i] * vectors[i]
Vec weighted_sum(std::span<const double> weights,
                 const std::vector<std::span<const double>>& vectors);
void weighted_sum_backward(std::span<const double> weights,
                           const std::vector<std::span<const double>>& vectors,
                           std::span<const double> dout, Vec& dweights,
                           std::vector<Vec>& dvectors);

Vec concat(std::span<const double> a, std::span<const double> b);

// One LSTM cell step with the standard i, f, o, g gates. Parameters:
// wx [4D x I], wh [4D x D], b [4D] laid out gate-major (i, f, o, g).
struct LstmCache {
  Vec x, h_prev, c_prev;
  Vec gate_i, gate_f, gate_o, gate_g;  // post-activation
  Vec c, tanh_c, h;
};

LstmCache lstm_cell(const Tensor& wx, const Tensor& wh, const Tensor& b,
                    std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev);

struct LstmGrads {
  Vec dx, dh_prev, dc_prev;
};

// dh/dc are the upstream gradients w.r.t. this step's h and c outputs.
LstmGrads lstm_cell_backward(const Tensor& wx, const Tensor& wh,
                             const LstmCache& cache, std::span<const double> dh,
                             std::span<const double> dc, Tensor& dwx,
                             Tensor& dwh, Tensor& db);

}  // namespace cachelab::ops

#endif  // CACHELAB_OPS_HPP_
