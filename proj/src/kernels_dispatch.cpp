#include "mmcl/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "kernels_detail.hpp"

namespace mmcl::kernels {

namespace {

struct KernelTable {
    void (*matmul_nt)(const double*, const double*, double*, std::size_t,
                      std::size_t, std::size_t);
    void (*matmul_nn_acc)(const double*, const double*, double*, std::size_t,
                          std::size_t, std::size_t);
    void (*matmul_tn_acc)(const double*, const double*, double*, std::size_t,
                          std::size_t, std::size_t);
    void (*add_row_vector)(double*, const double*, std::size_t, std::size_t);
    void (*col_sums_acc)(const double*, double*, std::size_t, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*sgd_step)(double*, const double*, double, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sq_dist)(const double*, const double*, std::size_t);
    void (*mul_vec)(const double*, const double*, double*, std::size_t);
    void (*mul_add_vec)(const double*, const double*, const double*, double*,
                        std::size_t);
    void (*tanh_backward_acc)(const double*, const double*, double*,
                              std::size_t);
};

constexpr KernelTable kScalarTable = {
    scalar::matmul_nt,      scalar::matmul_nn_acc, scalar::matmul_tn_acc,
    scalar::add_row_vector, scalar::col_sums_acc,  scalar::axpy,
    scalar::scale,          scalar::sgd_step,      scalar::dot,
    scalar::sum,            scalar::sq_dist,       scalar::mul_vec,
    scalar::mul_add_vec,    scalar::tanh_backward_acc,
};

#if defined(MMCL_HAVE_AVX2_TU)
constexpr KernelTable kAvx2Table = {
    avx2::matmul_nt,      avx2::matmul_nn_acc, avx2::matmul_tn_acc,
    avx2::add_row_vector, avx2::col_sums_acc,  avx2::axpy,
    avx2::scale,          avx2::sgd_step,      avx2::dot,
    avx2::sum,            avx2::sq_dist,       avx2::mul_vec,
    avx2::mul_add_vec,    avx2::tanh_backward_acc,
};
#endif

bool cpu_has_avx2() {
#if defined(MMCL_HAVE_AVX2_TU) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend pick_backend() {
    if (const char* env = std::getenv("MMCL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2())
            return Backend::Avx2;
    }
    return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
}

const KernelTable* table_for(Backend b) {
#if defined(MMCL_HAVE_AVX2_TU)
    if (b == Backend::Avx2) return &kAvx2Table;
#else
    (void)b;
#endif
    return &kScalarTable;
}

Backend g_backend = pick_backend();
const KernelTable* g_table = table_for(g_backend);

}  // namespace

Backend detect_backend() { return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar; }

Backend active_backend() { return g_backend; }

bool set_backend(Backend b) {
    if (b == Backend::Avx2 && !cpu_has_avx2()) return false;
    g_backend = b;
    g_table = table_for(b);
    return true;
}

const char* backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
    g_table->matmul_nt(a, b, c, m, k, n);
}

void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
    g_table->matmul_nn_acc(a, b, c, m, k, n);
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n) {
    g_table->matmul_tn_acc(a, b, c, m, k, n);
}

void add_row_vector(double* m, const double* v, std::size_t rows,
                    std::size_t cols) {
    g_table->add_row_vector(m, v, rows, cols);
}

void col_sums_acc(const double* m, double* v, std::size_t rows,
                  std::size_t cols) {
    g_table->col_sums_acc(m, v, rows, cols);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    g_table->axpy(a, x, y, n);
}

void scale(double a, double* x, std::size_t n) { g_table->scale(a, x, n); }

void sgd_step(double* w, const double* g, double lr, std::size_t n) {
    g_table->sgd_step(w, g, lr, n);
}

double dot(const double* x, const double* y, std::size_t n) {
    return g_table->dot(x, y, n);
}

double sum(const double* x, std::size_t n) { return g_table->sum(x, n); }

double sq_dist(const double* x, const double* y, std::size_t n) {
    return g_table->sq_dist(x, y, n);
}

void mul_vec(const double* a, const double* b, double* o, std::size_t n) {
    g_table->mul_vec(a, b, o, n);
}

void mul_add_vec(const double* a, const double* b, const double* c, double* o,
                 std::size_t n) {
    g_table->mul_add_vec(a, b, c, o, n);
}

void tanh_backward_acc(const double* y, const double* dy, double* dx,
                       std::size_t n) {
    g_table->tanh_backward_acc(y, dy, dx, n);
}

void tanh_vec(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

}  // namespace mmcl::kernels
