#ifndef CACHELAB_KERNELS_HPP_
#define CACHELAB_KERNELS_HPP_

#include <cstddef>

namespace cachelab::kernels {

// Inner loops of the differentiable kernel. Scalar reference versions are
// the semantic definition; SIMD variants must agree with them within
// floating-point reassociation tolerance (equivalence-tested).

namespace scalar {
double dot(const double* x, const double* y, size_t n);
// y += a * x
void axpy(double a, const double* x, double* y, size_t n);
// out[i] = x[i] * y[i]
void hadamard(const double* x, const double* y, double* out, size_t n);
// y = A x + b, A row-major [rows x cols]; b may be null
void gemv(const double* a, const double* x, const double* b, double* y,
          size_t rows, size_t cols);
// y += A^T x, A row-major [rows x cols], x has `rows` entries
void gemv_transposed_acc(const double* a, const double* x, double* y,
                         size_t rows, size_t cols);
// A += alpha * x y^T (rank-1 update), A row-major [rows x cols]
void ger_acc(double alpha, const double* x, const double* y, double* a,
             size_t rows, size_t cols);
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
double dot(const double* x, const double* y, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
void hadamard(const double* x, const double* y, double* out, size_t n);
void gemv(const double* a, const double* x, const double* b, double* y,
          size_t rows, size_t cols);
void gemv_transposed_acc(const double* a, const double* x, double* y,
                         size_t rows, size_t cols);
void ger_acc(double alpha, const double* x, const double* y, double* a,
             size_t rows, size_t cols);
}  // namespace avx2
#endif

struct Dispatch {
  double (*dot)(const double*, const double*, size_t);
  void (*axpy)(double, const double*, double*, size_t);
  void (*hadamard)(const double*, const double*, double*, size_t);
  void (*gemv)(const double*, const double*, const double*, double*, size_t, size_t);
  void (*gemv_transposed_acc)(const double*, const double*, double*, size_t, size_t);
  void (*ger_acc)(double, const double*, const double*, double*, size_t, size_t);
  const char* backend;
};

// Active table, chosen once at startup (AVX2 when the CPU supports it,
// scalar otherwise). Tests may force a backend.
const Dispatch& active();
void force_backend(const char* name);  // "scalar" or "avx2"

inline double dot(const double* x, const double* y, size_t n) {
  return active().dot(x, y, n);
}
inline void axpy(double a, const double* x, double* y, size_t n) {
  active().axpy(a, x, y, n);
}
inline void hadamard(const double* x, const double* y, double* out, size_t n) {
  active().hadamard(x, y, out, n);
}
inline void gemv(const double* a, const double* x, const double* b, double* y,
                 size_t rows, size_t cols) {
  active().gemv(a, x, b, y, rows, cols);
}
inline void gemv_transposed_acc(const double* a, const double* x, double* y,
                                size_t rows, size_t cols) {
  active().gemv_transposed_acc(a, x, y, rows, cols);
}
inline void ger_acc(double alpha, const double* x, const double* y, double* a,
                    size_t rows, size_t cols) {
  active().ger_acc(alpha, x, y, a, rows, cols);
}

}  // namespace cachelab::kernels

#endif  // CACHELAB_KERNELS_HPP_
