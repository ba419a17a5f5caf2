// Compiled with -mavx2 -mfma. Nothing in here may run before dispatch.cpp has
// confirmed CPU support.

#include "cann/simd/kernels.hpp"

#include <cmath>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace cann::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// Cephes-style exp: range reduction by ln2 and a (3,4) rational in r^2.
inline __m256d exp_pd(__m256d x) {
  const __m256d max_arg = _mm256_set1_pd(708.0);
  const __m256d min_arg = _mm256_set1_pd(-708.0);
  x = _mm256_min_pd(_mm256_max_pd(x, min_arg), max_arg);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);

  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, x);

  __m256d q = _mm256_set1_pd(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009E0));

  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  // Scale by 2^n through the exponent field.
  __m128i n32 = _mm256_cvtpd_epi32(fx);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  n64 = _mm256_slli_epi64(n64, 52);
  return _mm256_mul_pd(r, _mm256_castsi256_pd(n64));
}

inline __m256d tanh_pd(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d ax = _mm256_andnot_pd(sign_mask, x);

  // Large branch: 1 - 2 / (exp(2|x|) + 1), argument capped where tanh == 1.
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  __m256d e = exp_pd(_mm256_mul_pd(two, _mm256_min_pd(ax, _mm256_set1_pd(20.0))));
  __m256d big = _mm256_sub_pd(one, _mm256_div_pd(two, _mm256_add_pd(e, one)));
  big = _mm256_or_pd(big, _mm256_and_pd(sign_mask, x));

  // Small branch: x + x^3 P(x^2) / Q(x^2).
  const __m256d s = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(-9.64399179425052238628E-1);
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(-9.92877231001918586564E1));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(-1.61468768441708447952E3));
  __m256d q = _mm256_add_pd(s, _mm256_set1_pd(1.12811678491632931402E2));
  q = _mm256_fmadd_pd(q, s, _mm256_set1_pd(2.23548839060100448583E3));
  q = _mm256_fmadd_pd(q, s, _mm256_set1_pd(4.84406305325125486048E3));
  __m256d small = _mm256_fmadd_pd(_mm256_mul_pd(x, s), _mm256_div_pd(p, q), x);

  const __m256d use_big = _mm256_cmp_pd(ax, _mm256_set1_pd(0.625), _CMP_GT_OQ);
  return _mm256_blendv_pd(small, big, use_big);
}

inline __m256d logistic_pd(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
  return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

void affine_forward(const double* in, std::size_t rows, std::size_t n_in, const double* w,
                    const double* bias, std::size_t n_out, double* out) {
  const std::size_t vec_end = rows & ~std::size_t{3};
  for (std::size_t o = 0; o < n_out; ++o) {
    double* dst = out + o * rows;
    const double* wo = w + o * n_in;
    // Four independent row blocks per pass keep the FMA pipes busy.
    std::size_t r = 0;
    for (; r + 16 <= vec_end; r += 16) {
      __m256d a0 = _mm256_set1_pd(bias[o]);
      __m256d a1 = a0, a2 = a0, a3 = a0;
      for (std::size_t i = 0; i < n_in; ++i) {
        const __m256d wi = _mm256_set1_pd(wo[i]);
        const double* src = in + i * rows + r;
        a0 = _mm256_fmadd_pd(wi, _mm256_loadu_pd(src), a0);
        a1 = _mm256_fmadd_pd(wi, _mm256_loadu_pd(src + 4), a1);
        a2 = _mm256_fmadd_pd(wi, _mm256_loadu_pd(src + 8), a2);
        a3 = _mm256_fmadd_pd(wi, _mm256_loadu_pd(src + 12), a3);
      }
      _mm256_storeu_pd(dst + r, a0);
      _mm256_storeu_pd(dst + r + 4, a1);
      _mm256_storeu_pd(dst + r + 8, a2);
      _mm256_storeu_pd(dst + r + 12, a3);
    }
    for (; r < vec_end; r += 4) {
      __m256d acc = _mm256_set1_pd(bias[o]);
      for (std::size_t i = 0; i < n_in; ++i)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(wo[i]), _mm256_loadu_pd(in + i * rows + r), acc);
      _mm256_storeu_pd(dst + r, acc);
    }
    for (; r < rows; ++r) {
      double acc = bias[o];
      for (std::size_t i = 0; i < n_in; ++i)
        acc = std::fma(wo[i], in[i * rows + r], acc);
      dst[r] = acc;
    }
  }
}

void affine_backward_input(const double* delta, std::size_t rows, std::size_t n_out,
                           const double* w, std::size_t n_in, double* grad_in) {
  const std::size_t vec_end = rows & ~std::size_t{3};
  for (std::size_t i = 0; i < n_in; ++i) {
    double* dst = grad_in + i * rows;
    std::size_t r = 0;
    for (; r < vec_end; r += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t o = 0; o < n_out; ++o)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(w[o * n_in + i]),
                              _mm256_loadu_pd(delta + o * rows + r), acc);
      _mm256_storeu_pd(dst + r, acc);
    }
    for (; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t o = 0; o < n_out; ++o)
        acc = std::fma(w[o * n_in + i], delta[o * rows + r], acc);
      dst[r] = acc;
    }
  }
}

void affine_backward_params(const double* delta, const double* in, std::size_t rows,
                            std::size_t n_out, std::size_t n_in, double* grad_w, double* grad_b) {
  const std::size_t vec_end = rows & ~std::size_t{3};
  for (std::size_t o = 0; o < n_out; ++o) {
    const double* d = delta + o * rows;
    __m256d sb = _mm256_setzero_pd();
    for (std::size_t r = 0; r < vec_end; r += 4)
      sb = _mm256_add_pd(sb, _mm256_loadu_pd(d + r));
    double bsum = hsum(sb);
    for (std::size_t r = vec_end; r < rows; ++r)
      bsum += d[r];
    grad_b[o] += bsum;

    for (std::size_t i = 0; i < n_in; ++i) {
      const double* a = in + i * rows;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      std::size_t r = 0;
      for (; r + 8 <= vec_end; r += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(d + r), _mm256_loadu_pd(a + r), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(d + r + 4), _mm256_loadu_pd(a + r + 4), s1);
      }
      for (; r < vec_end; r += 4)
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(d + r), _mm256_loadu_pd(a + r), s0);
      double s = hsum(_mm256_add_pd(s0, s1));
      for (; r < rows; ++r)
        s += d[r] * a[r];
      grad_w[o * n_in + i] += s;
    }
  }
}

void tanh_inplace(double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, tanh_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i)
    x[i] = std::tanh(x[i]);
}

void logistic_inplace(double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, logistic_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i)
    x[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void tanh_backward(const double* y, double* delta, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d g = _mm256_fnmadd_pd(yv, yv, one);
    _mm256_storeu_pd(delta + i, _mm256_mul_pd(_mm256_loadu_pd(delta + i), g));
  }
  for (; i < n; ++i)
    delta[i] *= 1.0 - y[i] * y[i];
}

void logistic_backward(const double* y, double* delta, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d yv = _mm256_loadu_pd(y + i);
    const __m256d g = _mm256_mul_pd(yv, _mm256_sub_pd(one, yv));
    _mm256_storeu_pd(delta + i, _mm256_mul_pd(_mm256_loadu_pd(delta + i), g));
  }
  for (; i < n; ++i)
    delta[i] *= y[i] * (1.0 - y[i]);
}

double diff_sumsq(const double* a, const double* b, double* diff, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(diff + i, d);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    diff[i] = a[i] - b[i];
    s += diff[i] * diff[i];
  }
  return s;
}

void adam_step(double* w, const double* g, double* m, double* v, std::size_t n, double lr,
               double beta1, double beta2, double eps, double bias_corr1, double bias_corr2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d c1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d c2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d inv_bc1 = _mm256_set1_pd(1.0 / bias_corr1);
  const __m256d inv_bc2 = _mm256_set1_pd(1.0 / bias_corr2);
  const __m256d lr_v = _mm256_set1_pd(lr);
  const __m256d eps_v = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(c1, gv));
    __m256d vv = _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(c2, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, inv_bc1);
    const __m256d vhat = _mm256_mul_pd(vv, inv_bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr_v, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps_v));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] / bias_corr1) / (std::sqrt(v[i] / bias_corr2) + eps);
  }
}

} // namespace

const KernelTable* avx2_kernels_unchecked() {
  static const KernelTable table{Isa::avx2,          "avx2",          affine_forward,
                                 affine_backward_input, affine_backward_params, tanh_inplace,
                                 logistic_inplace,      tanh_backward,   logistic_backward,
                                 diff_sumsq,            adam_step};
  return &table;
}

} // namespace cann::simd

#else

namespace cann::simd {
const KernelTable* avx2_kernels_unchecked() { return nullptr; }
} // namespace cann::simd

#endif
