#include "kernels_detail.hpp"

// Reference kernels. Plain loops, no pragmas: these define the semantics the
// SIMD variants are equivalence-tested against.

namespace mmcl::kernels::scalar {

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            c[i * n + j] = acc;
        }
    }
}

void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
    for (std::size_t r = 0; r < m; ++r) {
        const double* ar = a + r * k;
        const double* br = b + r * n;
        for (std::size_t i = 0; i < k; ++i) {
            const double av = ar[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * br[j];
        }
    }
}

void add_row_vector(double* m, const double* v, std::size_t rows,
                    std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* mr = m + r * cols;
        for (std::size_t c = 0; c < cols; ++c) mr[c] += v[c];
    }
}

void col_sums_acc(const double* m, double* v, std::size_t rows,
                  std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* mr = m + r * cols;
        for (std::size_t c = 0; c < cols; ++c) v[c] += mr[c];
    }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void sgd_step(double* w, const double* g, double lr, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w[i] -= lr * g[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sq_dist(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void mul_vec(const double* a, const double* b, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
}

void mul_add_vec(const double* a, const double* b, const double* c, double* o,
                 std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * b[i] + c[i];
}

void tanh_backward_acc(const double* y, const double* dy, double* dx,
                       std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

}  // namespace mmcl::kernels::scalar
