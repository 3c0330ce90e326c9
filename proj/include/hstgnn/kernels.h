#ifndef HSTGNN_KERNELS_H
#define HSTGNN_KERNELS_H

#include <cstddef>
#include <string>

namespace kernels {

    // Data-parallel inner loops behind the matrix ops. Every kernel has a
    // scalar reference implementation; on x86 an AVX2+FMA variant is
    // selected at runtime when the CPU supports it. The active lane can be
    // forced with HSTGNN_KERNELS=scalar|avx2|auto (checked once, at first
    // dispatch).
    enum class lane { scalar, avx2 };

    lane active();
    char const* lane_name();
    bool avx2_available();

    // Force a lane (tests). Throws if the lane is unavailable on this CPU.
    void force(lane which);

    // c[n x m] = a[n x k] * b[k x m]; c must not alias a or b.
    void matmul(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m);

    // c[n x m] = a[n x k] * b[m x k]^T
    void matmul_nt(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m);

    // c[k x m] += a[n x k]^T * b[n x m]  (accumulating; used by backprop)
    void matmul_tn_acc(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m);

    // c[n x m] += a[n x k] * b[k x m]
    void matmul_acc(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m);

    // c[n x m] += a[n x k] * b[m x k]^T
    void matmul_nt_acc(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m);

    void add(double const* a, double const* b, double* c, std::size_t n);
    void sub(double const* a, double const* b, double* c, std::size_t n);
    void mul(double const* a, double const* b, double* c, std::size_t n);

    // y += alpha * x
    void axpy(double alpha, double const* x, double* y, std::size_t n);
    // y += alpha * a .* b
    void axpby_mul(double alpha, double const* a, double const* b, double* y, std::size_t n);
    void scale(double const* x, double alpha, double* y, std::size_t n);

    double dot(double const* x, double const* y, std::size_t n);
    double sum(double const* x, std::size_t n);
    double sum_squares(double const* x, std::size_t n);
    double max_value(double const* x, std::size_t n);

    // Transcendentals stay scalar on every lane.
    void vexp(double const* x, double* y, std::size_t n);
    void vsigmoid(double const* x, double* y, std::size_t n);
    void vtanh(double const* x, double* y, std::size_t n);
    void vrelu(double const* x, double* y, std::size_t n);

}

#endif
