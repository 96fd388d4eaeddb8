#include "kernels_detail.hpp"

#if defined(MMCL_HAVE_AVX2_TU)

#include <immintrin.h>

// AVX2+FMA kernels, 4 doubles per lane. This translation unit is the only
// one compiled with -mavx2 -mfma; it is entered only after the dispatcher
// has confirmed CPU support.

namespace mmcl::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            std::size_t t = 0;
            for (; t + 4 <= k; t += 4) {
                __m256d av = _mm256_loadu_pd(ai + t);
                __m256d bv = _mm256_loadu_pd(bj + t);
                acc = _mm256_fmadd_pd(av, bv, acc);
            }
            double s = hsum(acc);
            for (; t < k; ++t) s += ai[t] * bj[t];
            c[i * n + j] = s;
        }
    }
}

void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t t = 0; t < k; ++t) {
            const __m256d av = _mm256_set1_pd(ai[t]);
            const double* bt = b + t * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(ci + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(bt + j), cv);
                _mm256_storeu_pd(ci + j, cv);
            }
            for (; j < n; ++j) ci[j] += ai[t] * bt[j];
        }
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* ar = a + r * k;
        const double* br = b + r * n;
        for (std::size_t i = 0; i < k; ++i) {
            const __m256d av = _mm256_set1_pd(ar[i]);
            double* ci = c + i * n;
            std::size_t j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(ci + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(br + j), cv);
                _mm256_storeu_pd(ci + j, cv);
            }
            for (; j < n; ++j) ci[j] += ar[i] * br[j];
        }
    }
}

void add_row_vector(double* m, const double* v, std::size_t rows,
                    std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* mr = m + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d mv = _mm256_loadu_pd(mr + c);
            mv = _mm256_add_pd(mv, _mm256_loadu_pd(v + c));
            _mm256_storeu_pd(mr + c, mv);
        }
        for (; c < cols; ++c) mr[c] += v[c];
    }
}

void col_sums_acc(const double* m, double* v, std::size_t rows,
                  std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* mr = m + r * cols;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            __m256d vv = _mm256_loadu_pd(v + c);
            vv = _mm256_add_pd(vv, _mm256_loadu_pd(mr + c));
            _mm256_storeu_pd(v + c, vv);
        }
        for (; c < cols; ++c) v[c] += mr[c];
    }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= a;
}

void sgd_step(double* w, const double* g, double lr, std::size_t n) {
    const __m256d lv = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d wv = _mm256_loadu_pd(w + i);
        wv = _mm256_fnmadd_pd(lv, _mm256_loadu_pd(g + i), wv);
        _mm256_storeu_pd(w + i, wv);
    }
    for (; i < n; ++i) w[i] -= lr * g[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                              acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double sq_dist(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i),
                                  _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

void mul_vec(const double* a, const double* b, double* o, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(
            o + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                 _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) o[i] = a[i] * b[i];
}

void mul_add_vec(const double* a, const double* b, const double* c, double* o,
                 std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_fmadd_pd(_mm256_loadu_pd(a + i),
                                    _mm256_loadu_pd(b + i),
                                    _mm256_loadu_pd(c + i));
        _mm256_storeu_pd(o + i, r);
    }
    for (; i < n; ++i) o[i] = a[i] * b[i] + c[i];
}

void tanh_backward_acc(const double* y, const double* dy, double* dx,
                       std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        __m256d sech2 = _mm256_fnmadd_pd(yv, yv, one);  // 1 - y*y
        __m256d dxv = _mm256_loadu_pd(dx + i);
        dxv = _mm256_fmadd_pd(_mm256_loadu_pd(dy + i), sech2, dxv);
        _mm256_storeu_pd(dx + i, dxv);
    }
    for (; i < n; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

}  // namespace mmcl::kernels::avx2

#endif  // MMCL_HAVE_AVX2_TU
