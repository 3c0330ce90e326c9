#ifndef HSTGNN_KERNELS_TABLE_H
#define HSTGNN_KERNELS_TABLE_H

#include <cstddef>

namespace kernels {

    // Internal: one function pointer per dispatched kernel.
    struct dispatch_table {
        void (*matmul)(double const*, double const*, double*, std::size_t, std::size_t, std::size_t);
        void (*matmul_acc)(double const*, double const*, double*, std::size_t, std::size_t, std::size_t);
        void (*matmul_nt)(double const*, double const*, double*, std::size_t, std::size_t, std::size_t);
        void (*matmul_nt_acc)(double const*, double const*, double*, std::size_t, std::size_t, std::size_t);
        void (*matmul_tn_acc)(double const*, double const*, double*, std::size_t, std::size_t, std::size_t);
        void (*add)(double const*, double const*, double*, std::size_t);
        void (*sub)(double const*, double const*, double*, std::size_t);
        void (*mul)(double const*, double const*, double*, std::size_t);
        void (*axpy)(double, double const*, double*, std::size_t);
        void (*axpby_mul)(double, double const*, double const*, double*, std::size_t);
        void (*scale)(double const*, double, double*, std::size_t);
        double (*dot)(double const*, double const*, std::size_t);
        double (*sum)(double const*, std::size_t);
        double (*sum_squares)(double const*, std::size_t);
        double (*max_value)(double const*, std::size_t);
    };

    namespace avx2 {
        bool cpu_supported();
        void fill_table(dispatch_table& t);
    }

}

#endif
