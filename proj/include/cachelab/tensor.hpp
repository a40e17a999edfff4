#ifndef CACHELAB_TENSOR_HPP_
#define CACHELAB_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace cachelab {

// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<size_t> s);

  size_t size() const { return values.size(); }
  size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  double* row(size_t r) { return values.data() + r * cols(); }
  const double* row(size_t r) const { return values.data() + r * cols(); }

  void fill(double v) { std::fill(values.begin(), values.end(), v); }
};

size_t shape_size(const std::vector<size_t>& shape);

struct Parameter {
  Tensor value;
  Tensor grad;
};

// Named parameters with gradient accumulators. Iteration order is the
// name order (std::map), which fixes checkpoint and update order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, std::vector<size_t> shape);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  void zero_grad();
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  size_t count() const { return params_.size(); }
  size_t total_values() const;

 private:
  std::map<std::string, Parameter> params_;
};

void glorot_uniform(Tensor& t, std::mt19937_64& rng);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // 0 disables clipping
};

class AdamState {
 public:
  AdamState(const ParameterStore& store, const AdamConfig& config);

  // Bias-corrected Adam update from the accumulated gradients; zeroes the
  // gradients afterward.
  void step(ParameterStore& store);

  uint64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
  uint64_t step_count_ = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  bool passed = false;
};

// Compares analytic gradients against central finite differences for a
// scalar-valued function of the store's parameters. The function must
// populate gradients when asked.
GradCheckReport grad_check(
    const std::function<double(bool compute_grads)>& function,
    ParameterStore& store, double tolerance, double fd_step = 1e-5);

}  // namespace cachelab

#endif  // CACHELAB_TENSOR_HPP_
