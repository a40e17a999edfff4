#include "cachelab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cachelab/kernels.hpp"

namespace cachelab::ops {

void check_shape(bool ok, const char* op) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + op);
}

Vec linear(const Tensor& w, std::span<const double> x, const Tensor* b) {
  check_shape(w.cols() == x.size(), "linear");
  check_shape(!b || b->size() == w.rows(), "linear");
  Vec y(w.rows());
  kernels::gemv(w.data(), x.data(), b ? b->data() : nullptr, y.data(), w.rows(),
                w.cols());
  return y;
}

Vec linear_backward(const Tensor& w, std::span<const double> x,
                    std::span<const double> dy, Tensor& dw, Tensor* db) {
  check_shape(dy.size() == w.rows() && x.size() == w.cols(), "linear_backward");
  Vec dx(w.cols(), 0.0);
  kernels::gemv_transposed_acc(w.data(), dy.data(), dx.data(), w.rows(), w.cols());
  kernels::ger_acc(1.0, dy.data(), x.data(), dw.data(), w.rows(), w.cols());
  if (db) kernels::axpy(1.0, dy.data(), db->data(), dy.size());
  return dx;
}

Vec sigmoid(std::span<const double> x) {
  Vec y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return y;
}

Vec sigmoid_backward(std::span<const double> y, std::span<const double> dy) {
  Vec dx(y.size());
  for (size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (1.0 - y[i]);
  return dx;
}

Vec tanh_op(std::span<const double> x) {
  Vec y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Vec tanh_backward(std::span<const double> y, std::span<const double> dy) {
  Vec dx(y.size());
  for (size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
  return dx;
}

Vec softmax(std::span<const double> logits) {
  check_shape(!logits.empty(), "softmax");
  const double max_z = *std::max_element(logits.begin(), logits.end());
  Vec probs(logits.size());
  double sum = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_z);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

Vec softmax_backward(std::span<const double> probs, std::span<const double> dprobs) {
  check_shape(probs.size() == dprobs.size(), "softmax_backward");
  const double inner = kernels::dot(probs.data(), dprobs.data(), probs.size());
  Vec dlogits(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    dlogits[i] = probs[i] * (dprobs[i] - inner);
  }
  return dlogits;
}

Vec log_op(std::span<const double> x) {
  Vec y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = std::log(std::max(x[i], 1e-12));
  return y;
}

Vec log_backward(std::span<const double> x, std::span<const double> dy) {
  Vec dx(x.size());
  for (size_t i = 0; i < x.size(); ++i) dx[i] = dy[i] / std::max(x[i], 1e-12);
  return dx;
}

double mean_squared_error(std::span<const double> pred,
                          std::span<const double> target) {
  check_shape(pred.size() == target.size() && !pred.empty(), "mean_squared_error");
  double sum = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(pred.size());
}

Vec mean_squared_error_backward(std::span<const double> pred,
                                std::span<const double> target, double dloss) {
  Vec dpred(pred.size());
  const double scale = 2.0 * dloss / static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    dpred[i] = scale * (pred[i] - target[i]);
  }
  return dpred;
}

Vec weighted_sum(std::span<const double> weights,
                 const std::vector<std::span<const double>>& vectors) {
  check_shape(weights.size() == vectors.size() && !vectors.empty(), "weighted_sum");
  Vec out(vectors[0].size(), 0.0);
  for (size_t i = 0; i < weights.size(); ++i) {
    check_shape(vectors[i].size() == out.size(), "weighted_sum");
    kernels::axpy(weights[i], vectors[i].data(), out.data(), out.size());
  }
  return out;
}

void weighted_sum_backward(std::span<const double> weights,
                           const std::vector<std::span<const double>>& vectors,
                           std::span<const double> dout, Vec& dweights,
                           std::vector<Vec>& dvectors) {
  dweights.assign(weights.size(), 0.0);
  dvectors.resize(vectors.size());
  for (size_t i = 0; i < weights.size(); ++i) {
    dweights[i] = kernels::dot(vectors[i].data(), dout.data(), dout.size());
    dvectors[i].assign(dout.size(), 0.0);
    kernels::axpy(weights[i], dout.data(), dvectors[i].data(), dout.size());
  }
}

Vec concat(std::span<const double> a, std::span<const double> b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

LstmCache lstm_cell(const Tensor& wx, const Tensor& wh, const Tensor& b,
                    std::span<const double> x, std::span<const double> h_prev,
                    std::span<const double> c_prev) {
  const size_t d = h_prev.size();
  check_shape(wx.rows() == 4 * d && wx.cols() == x.size(), "lstm_cell");
  check_shape(wh.rows() == 4 * d && wh.cols() == d, "lstm_cell");
  check_shape(b.size() == 4 * d && c_prev.size() == d, "lstm_cell");

  Vec z(4 * d);
  kernels::gemv(wx.data(), x.data(), b.data(), z.data(), 4 * d, x.size());
  Vec zh(4 * d);
  kernels::gemv(wh.data(), h_prev.data(), nullptr, zh.data(), 4 * d, d);
  kernels::axpy(1.0, zh.data(), z.data(), 4 * d);

  LstmCache cache;
  cache.x.assign(x.begin(), x.end());
  cache.h_prev.assign(h_prev.begin(), h_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());
  cache.gate_i = sigmoid({z.data(), d});
  cache.gate_f = sigmoid({z.data() + d, d});
  cache.gate_o = sigmoid({z.data() + 2 * d, d});
  cache.gate_g = tanh_op({z.data() + 3 * d, d});
  cache.c.resize(d);
  for (size_t j = 0; j < d; ++j) {
    cache.c[j] = cache.gate_f[j] * c_prev[j] + cache.gate_i[j] * cache.gate_g[j];
  }
  cache.tanh_c = tanh_op(cache.c);
  cache.h.resize(d);
  kernels::hadamard(cache.gate_o.data(), cache.tanh_c.data(), cache.h.data(), d);
  return cache;
}

LstmGrads lstm_cell_backward(const Tensor& wx, const Tensor& wh,
                             const LstmCache& cache, std::span<const double> dh,
                             std::span<const double> dc, Tensor& dwx,
                             Tensor& dwh, Tensor& db) {
  const size_t d = cache.h.size();
  check_shape(dh.size() == d && dc.size() == d, "lstm_cell_backward");

  Vec dz(4 * d);
  Vec dc_total(d);
  for (size_t j = 0; j < d; ++j) {
    const double do_ = dh[j] * cache.tanh_c[j];
    dc_total[j] = dc[j] + dh[j] * cache.gate_o[j] *
                              (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
    const double di = dc_total[j] * cache.gate_g[j];
    const double df = dc_total[j] * cache.c_prev[j];
    const double dg = dc_total[j] * cache.gate_i[j];
    dz[j] = di * cache.gate_i[j] * (1.0 - cache.gate_i[j]);
    dz[d + j] = df * cache.gate_f[j] * (1.0 - cache.gate_f[j]);
    dz[2 * d + j] = do_ * cache.gate_o[j] * (1.0 - cache.gate_o[j]);
    dz[3 * d + j] = dg * (1.0 - cache.gate_g[j] * cache.gate_g[j]);
  }

  LstmGrads grads;
  grads.dx.assign(cache.x.size(), 0.0);
  grads.dh_prev.assign(d, 0.0);
  grads.dc_prev.resize(d);
  kernels::gemv_transposed_acc(wx.data(), dz.data(), grads.dx.data(), 4 * d,
                               cache.x.size());
  kernels::gemv_transposed_acc(wh.data(), dz.data(), grads.dh_prev.data(), 4 * d, d);
  kernels::hadamard(dc_total.data(), cache.gate_f.data(), grads.dc_prev.data(), d);
  kernels::ger_acc(1.0, dz.data(), cache.x.data(), dwx.data(), 4 * d,
                   cache.x.size());
  kernels::ger_acc(1.0, dz.data(), cache.h_prev.data(), dwh.data(), 4 * d, d);
  kernels::axpy(1.0, dz.data(), db.data(), 4 * d);
  return grads;
}

}  // namespace cachelab::ops
