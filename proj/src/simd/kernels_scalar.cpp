#include "cann/simd/kernels.hpp"

#include <cmath>

namespace cann::simd {
namespace {

void affine_forward(const double* in, std::size_t rows, std::size_t n_in, const double* w,
                    const double* bias, std::size_t n_out, double* out) {
  for (std::size_t o = 0; o < n_out; ++o) {
    double* dst = out + o * rows;
    for (std::size_t r = 0; r < rows; ++r)
      dst[r] = bias[o];
    for (std::size_t i = 0; i < n_in; ++i) {
      const double wi = w[o * n_in + i];
      const double* src = in + i * rows;
      for (std::size_t r = 0; r < rows; ++r)
        dst[r] += wi * src[r];
    }
  }
}

void affine_backward_input(const double* delta, std::size_t rows, std::size_t n_out,
                           const double* w, std::size_t n_in, double* grad_in) {
  for (std::size_t i = 0; i < n_in; ++i) {
    double* dst = grad_in + i * rows;
    for (std::size_t r = 0; r < rows; ++r)
      dst[r] = 0.0;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double wi = w[o * n_in + i];
      const double* src = delta + o * rows;
      for (std::size_t r = 0; r < rows; ++r)
        dst[r] += wi * src[r];
    }
  }
}

void affine_backward_params(const double* delta, const double* in, std::size_t rows,
                            std::size_t n_out, std::size_t n_in, double* grad_w, double* grad_b) {
  for (std::size_t o = 0; o < n_out; ++o) {
    const double* d = delta + o * rows;
    double sb = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
      sb += d[r];
    grad_b[o] += sb;
    for (std::size_t i = 0; i < n_in; ++i) {
      const double* a = in + i * rows;
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r)
        s += d[r] * a[r];
      grad_w[o * n_in + i] += s;
    }
  }
}

void tanh_inplace(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::tanh(x[i]);
}

void logistic_inplace(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    x[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void tanh_backward(const double* y, double* delta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    delta[i] *= 1.0 - y[i] * y[i];
}

void logistic_backward(const double* y, double* delta, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    delta[i] *= y[i] * (1.0 - y[i]);
}

double diff_sumsq(const double* a, const double* b, double* diff, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = a[i] - b[i];
    s += diff[i] * diff[i];
  }
  return s;
}

void adam_step(double* w, const double* g, double* m, double* v, std::size_t n, double lr,
               double beta1, double beta2, double eps, double bias_corr1, double bias_corr2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bias_corr1;
    const double vhat = v[i] / bias_corr2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

} // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar,          "scalar",          affine_forward,
                                 affine_backward_input, affine_backward_params, tanh_inplace,
                                 logistic_inplace,      tanh_backward,     logistic_backward,
                                 diff_sumsq,            adam_step};
  return table;
}

} // namespace cann::simd
