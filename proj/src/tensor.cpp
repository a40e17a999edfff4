#include "cachelab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cachelab {

size_t shape_size(const std::vector<size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<size_t> s) : shape(std::move(s)) {
  values.assign(shape_size(shape), 0.0);
}

Parameter& ParameterStore::add(const std::string& name,
                               std::vector<size_t> shape) {
  const auto [it, inserted] = params_.try_emplace(name);
  if (!inserted) throw std::invalid_argument("duplicate parameter: " + name);
  it->second.value = Tensor(shape);
  it->second.grad = Tensor(std::move(shape));
  return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  const auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter: " + name);
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter: " + name);
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
  return params_.contains(name);
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.grad.fill(0.0);
}

size_t ParameterStore::total_values() const {
  size_t total = 0;
  for (const auto& [name, p] : params_) total += p.value.size();
  return total;
}

void glorot_uniform(Tensor& t, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(t.cols());
  const double fan_out = static_cast<double>(t.rows());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> uni(-limit, limit);
  for (double& v : t.values) v = uni(rng);
}

AdamState::AdamState(const ParameterStore& store, const AdamConfig& config)
    : config_(config) {
  for (const auto& [name, p] : store) {
    m_.emplace(name, Tensor(p.value.shape));
    v_.emplace(name, Tensor(p.value.shape));
  }
}

void AdamState::step(ParameterStore& store) {
  ++step_count_;
  double scale = 1.0;
  if (config_.clip_norm > 0) {
    double sq = 0;
    for (const auto& [name, p] : store) {
      for (double g : p.grad.values) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (auto& [name, p] : store) {
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.values[i] * scale;
      m.values[i] = config_.beta1 * m.values[i] + (1 - config_.beta1) * g;
      v.values[i] = config_.beta2 * v.values[i] + (1 - config_.beta2) * g * g;
      const double m_hat = m.values[i] / bc1;
      const double v_hat = v.values[i] / bc2;
      p.value.values[i] -=
          config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    p.grad.fill(0.0);
  }
}

GradCheckReport grad_check(
    const std::function<double(bool compute_grads)>& function,
    ParameterStore& store, double tolerance, double fd_step) {
  store.zero_grad();
  function(true);
  // Copy analytic gradients before perturbing.
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, p] : store) analytic.emplace(name, p.grad);

  GradCheckReport report;
  for (auto& [name, p] : store) {
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value.values[i];
      p.value.values[i] = saved + fd_step;
      const double plus = function(false);
      p.value.values[i] = saved - fd_step;
      const double minus = function(false);
      p.value.values[i] = saved;
      const double numeric = (plus - minus) / (2 * fd_step);
      const double exact = analytic.at(name).values[i];
      const double denom = std::max({std::abs(numeric), std::abs(exact), 1.0});
      const double rel = std::abs(numeric - exact) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
      }
    }
  }
  store.zero_grad();
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace cachelab
