#pragma once

// Dense kernels behind batched network training. Activations are stored
// feature-major: a layer with `n` features over a batch of `rows` samples is a
// contiguous n x rows block, so the inner loops run over the batch.
//
// Two implementations exist: a scalar reference and an AVX2/FMA variant. The
// table is picked once per process (see active()); CANN_SIMD=scalar in the
// environment forces the reference path.

#include <cstddef>
#include <string_view>

namespace cann::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  // out[o, r] = bias[o] + sum_i w[o, i] * in[i, r]
  void (*affine_forward)(const double* in, std::size_t rows, std::size_t n_in, const double* w,
                         const double* bias, std::size_t n_out, double* out);

  // grad_in[i, r] = sum_o w[o, i] * delta[o, r]
  void (*affine_backward_input)(const double* delta, std::size_t rows, std::size_t n_out,
                                const double* w, std::size_t n_in, double* grad_in);

  // grad_w[o, i] += sum_r delta[o, r] * in[i, r];  grad_b[o] += sum_r delta[o, r]
  void (*affine_backward_params)(const double* delta, const double* in, std::size_t rows,
                                 std::size_t n_out, std::size_t n_in, double* grad_w,
                                 double* grad_b);

  void (*tanh_inplace)(double* x, std::size_t n);
  void (*logistic_inplace)(double* x, std::size_t n);

  // delta *= f'(z) expressed through the activated value y.
  void (*tanh_backward)(const double* y, double* delta, std::size_t n);
  void (*logistic_backward)(const double* y, double* delta, std::size_t n);

  // Returns sum of squares of (a - b); writes diff = a - b.
  double (*diff_sumsq)(const double* a, const double* b, double* diff, std::size_t n);

  // Adam moment update and parameter step with precomputed bias corrections.
  void (*adam_step)(double* w, const double* g, double* m, double* v, std::size_t n, double lr,
                    double beta1, double beta2, double eps, double bias_corr1, double bias_corr2);
};

const KernelTable& scalar_kernels();

// nullptr when the binary or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

// The table used by training code. Selected on first call.
const KernelTable& active();

// Override the selection (tests and the --simd CLI flag). Requesting avx2 on a
// machine without it throws cann::ConfigError.
void select(Isa isa);

Isa parse_isa(std::string_view name);

} // namespace cann::simd
