#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the model, losses, and optimizer. Every
// operation has a scalar reference implementation and, on x86-64, an AVX2+FMA
// variant. The backend is selected once at startup from CPU capabilities and
// can be overridden (MMCL_KERNELS=scalar|avx2 or set_backend) for testing.
// The two backends agree to floating-point roundoff only; within one process
// the active backend is fixed, so runs are bit-reproducible.

namespace mmcl::kernels {

enum class Backend { Scalar, Avx2 };

Backend detect_backend();
Backend active_backend();
bool set_backend(Backend b);  // false if unsupported on this CPU
const char* backend_name(Backend b);

// ---------------------------------------------------------------------------
// Matrix products (row-major, unit stride).
// ---------------------------------------------------------------------------

/// C[m x n] = A[m x k] * B[n x k]^T. Used for X * W^T with W stored out-by-in.
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);

/// C[m x n] += A[m x k] * B[k x n]. Used for dX = dY * W.
void matmul_nn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);

/// C[k x n] += A[m x k]^T * B[m x n]. Used for dW = dY^T * X.
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t m,
                   std::size_t k, std::size_t n);

// ---------------------------------------------------------------------------
// Elementwise and reduction primitives.
// ---------------------------------------------------------------------------

/// m[r] += v for every row r.
void add_row_vector(double* m, const double* v, std::size_t rows,
                    std::size_t cols);

/// v[c] += sum over rows of m[r][c].
void col_sums_acc(const double* m, double* v, std::size_t rows,
                  std::size_t cols);

void axpy(double a, const double* x, double* y, std::size_t n);  // y += a*x
void scale(double a, double* x, std::size_t n);                  // x *= a
void sgd_step(double* w, const double* g, double lr, std::size_t n);

double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sq_dist(const double* x, const double* y, std::size_t n);

/// o = a .* b
void mul_vec(const double* a, const double* b, double* o, std::size_t n);
/// o = a .* b + c   (FiLM affine modulation)
void mul_add_vec(const double* a, const double* b, const double* c, double* o,
                 std::size_t n);
/// dx += dy .* (1 - y.^2), with y the tanh outputs.
void tanh_backward_acc(const double* y, const double* dy, double* dx,
                       std::size_t n);

// Shared scalar helpers; not dispatched (libm-bound, never a hot-loop cost).
void tanh_vec(const double* x, double* y, std::size_t n);

}  // namespace mmcl::kernels
