#include "cachelab/kernels.hpp"

namespace cachelab::kernels::scalar {

double dot(const double* x, const double* y, size_t n) {
  double sum = 0;
  for (size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void hadamard(const double* x, const double* y, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void gemv(const double* a, const double* x, const double* b, double* y,
          size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    y[r] = dot(a + r * cols, x, cols) + (b ? b[r] : 0.0);
  }
}

void gemv_transposed_acc(const double* a, const double* x, double* y,
                         size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void ger_acc(double alpha, const double* x, const double* y, double* a,
             size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) axpy(alpha * x[r], y, a + r * cols, cols);
}

}  // namespace cachelab::kernels::scalar
