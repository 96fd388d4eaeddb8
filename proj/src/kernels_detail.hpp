#pragma once

#include <cstddef>

// Per-backend entry points. Signatures mirror the public API in kernels.hpp.

#define MMCL_KERNEL_DECLS                                                      \
    void matmul_nt(const double*, const double*, double*, std::size_t,        \
                   std::size_t, std::size_t);                                  \
    void matmul_nn_acc(const double*, const double*, double*, std::size_t,    \
                       std::size_t, std::size_t);                              \
    void matmul_tn_acc(const double*, const double*, double*, std::size_t,    \
                       std::size_t, std::size_t);                              \
    void add_row_vector(double*, const double*, std::size_t, std::size_t);    \
    void col_sums_acc(const double*, double*, std::size_t, std::size_t);      \
    void axpy(double, const double*, double*, std::size_t);                   \
    void scale(double, double*, std::size_t);                                 \
    void sgd_step(double*, const double*, double, std::size_t);               \
    double dot(const double*, const double*, std::size_t);                    \
    double sum(const double*, std::size_t);                                   \
    double sq_dist(const double*, const double*, std::size_t);                \
    void mul_vec(const double*, const double*, double*, std::size_t);         \
    void mul_add_vec(const double*, const double*, const double*, double*,    \
                     std::size_t);                                            \
    void tanh_backward_acc(const double*, const double*, double*,             \
                           std::size_t);

namespace mmcl::kernels::scalar {
MMCL_KERNEL_DECLS
}

#if defined(MMCL_HAVE_AVX2_TU)
namespace mmcl::kernels::avx2 {
MMCL_KERNEL_DECLS
}
#endif
