#include "hstgnn/kernels.h"
#include "kernels_table.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace kernels {

    namespace scalar {

        void matmul(double const* a, double const* b, double* c,
            std::size_t n, std::size_t k, std::size_t m)
        {
            std::memset(c, 0, n * m * sizeof(double));
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double aik = a[i * k + kk];
                    double const* brow = b + kk * m;
                    double* crow = c + i * m;
                    for (std::size_t j = 0; j < m; ++j) {
                        crow[j] += aik * brow[j];
                    }
                }
            }
        }

        void matmul_acc(double const* a, double const* b, double* c,
            std::size_t n, std::size_t k, std::size_t m)
        {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double aik = a[i * k + kk];
                    double const* brow = b + kk * m;
                    double* crow = c + i * m;
                    for (std::size_t j = 0; j < m; ++j) {
                        crow[j] += aik * brow[j];
                    }
                }
            }
        }

        void matmul_nt(double const* a, double const* b, double* c,
            std::size_t n, std::size_t k, std::size_t m)
        {
            for (std::size_t i = 0; i < n; ++i) {
                double const* arow = a + i * k;
                for (std::size_t j = 0; j < m; ++j) {
                    double const* brow = b + j * k;
                    double s = 0.0;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        s += arow[kk] * brow[kk];
                    }
                    c[i * m + j] = s;
                }
            }
        }

        void matmul_nt_acc(double const* a, double const* b, double* c,
            std::size_t n, std::size_t k, std::size_t m)
        {
            for (std::size_t i = 0; i < n; ++i) {
                double const* arow = a + i * k;
                for (std::size_t j = 0; j < m; ++j) {
                    double const* brow = b + j * k;
                    double s = 0.0;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        s += arow[kk] * brow[kk];
                    }
                    c[i * m + j] += s;
                }
            }
        }

        void matmul_tn_acc(double const* a, double const* b, double* c,
            std::size_t n, std::size_t k, std::size_t m)
        {
            for (std::size_t r = 0; r < n; ++r) {
                double const* arow = a + r * k;
                double const* brow = b + r * m;
                for (std::size_t i = 0; i < k; ++i) {
                    double ai = arow[i];
                    if (ai == 0.0) {
                        continue;
                    }
                    double* crow = c + i * m;
                    for (std::size_t j = 0; j < m; ++j) {
                        crow[j] += ai * brow[j];
                    }
                }
            }
        }

        void add(double const* a, double const* b, double* c, std::size_t n)
        {
            for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
        }

        void sub(double const* a, double const* b, double* c, std::size_t n)
        {
            for (std::size_t i = 0; i < n; ++i) c[i] = a[i] - b[i];
        }

        void mul(double const* a, double const* b, double* c, std::size_t n)
        {
            for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
        }

        void axpy(double alpha, double const* x, double* y, std::size_t n)
        {
            for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
        }

        void axpby_mul(double alpha, double const* a, double const* b, double* y, std::size_t n)
        {
            for (std::size_t i = 0; i < n; ++i) y[i] += alpha * a[i] * b[i];
        }

        void scale(double const* x, double alpha, double* y, std::size_t n)
        {
            for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
        }

        double dot(double const* x, double const* y, std::size_t n)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
            return s;
        }

        double sum(double const* x, std::size_t n)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += x[i];
            return s;
        }

        double sum_squares(double const* x, std::size_t n)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
            return s;
        }

        double max_value(double const* x, std::size_t n)
        {
            double m = x[0];
            for (std::size_t i = 1; i < n; ++i) {
                if (x[i] > m) m = x[i];
            }
            return m;
        }

    }

    namespace {

        void fill_scalar(dispatch_table& t)
        {
            t.matmul = &scalar::matmul;
            t.matmul_acc = &scalar::matmul_acc;
            t.matmul_nt = &scalar::matmul_nt;
            t.matmul_nt_acc = &scalar::matmul_nt_acc;
            t.matmul_tn_acc = &scalar::matmul_tn_acc;
            t.add = &scalar::add;
            t.sub = &scalar::sub;
            t.mul = &scalar::mul;
            t.axpy = &scalar::axpy;
            t.axpby_mul = &scalar::axpby_mul;
            t.scale = &scalar::scale;
            t.dot = &scalar::dot;
            t.sum = &scalar::sum;
            t.sum_squares = &scalar::sum_squares;
            t.max_value = &scalar::max_value;
        }

        dispatch_table g_table;
        lane g_lane = lane::scalar;
        bool g_initialized = false;

        void apply(lane which)
        {
            fill_scalar(g_table);
            g_lane = lane::scalar;
#ifdef HSTGNN_WITH_AVX2
            if (which == lane::avx2) {
                avx2::fill_table(g_table);
                g_lane = lane::avx2;
            }
#else
            (void)which;
#endif
        }

        void init_once()
        {
            if (g_initialized) {
                return;
            }
            g_initialized = true;
            lane want = avx2_available() ? lane::avx2 : lane::scalar;
            if (char const* env = std::getenv("HSTGNN_KERNELS")) {
                std::string v(env);
                if (v == "scalar") {
                    want = lane::scalar;
                } else if (v == "avx2") {
                    if (!avx2_available()) {
                        throw std::runtime_error("HSTGNN_KERNELS=avx2 but avx2 is unavailable");
                    }
                    want = lane::avx2;
                } else if (v != "auto" && !v.empty()) {
                    throw std::runtime_error("HSTGNN_KERNELS: unknown lane '" + v + "'");
                }
            }
            apply(want);
        }

    }

    bool avx2_available()
    {
#ifdef HSTGNN_WITH_AVX2
        return avx2::cpu_supported();
#else
        return false;
#endif
    }

    lane active()
    {
        init_once();
        return g_lane;
    }

    char const* lane_name()
    {
        return active() == lane::avx2 ? "avx2" : "scalar";
    }

    void force(lane which)
    {
        init_once();
        if (which == lane::avx2 && !avx2_available()) {
            throw std::runtime_error("avx2 lane unavailable on this CPU/build");
        }
        apply(which);
    }

    void matmul(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m)
    {
        init_once();
        g_table.matmul(a, b, c, n, k, m);
    }

    void matmul_acc(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m)
    {
        init_once();
        g_table.matmul_acc(a, b, c, n, k, m);
    }

    void matmul_nt(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m)
    {
        init_once();
        g_table.matmul_nt(a, b, c, n, k, m);
    }

    void matmul_nt_acc(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m)
    {
        init_once();
        g_table.matmul_nt_acc(a, b, c, n, k, m);
    }

    void matmul_tn_acc(double const* a, double const* b, double* c,
        std::size_t n, std::size_t k, std::size_t m)
    {
        init_once();
        g_table.matmul_tn_acc(a, b, c, n, k, m);
    }

    void add(double const* a, double const* b, double* c, std::size_t n)
    {
        init_once();
        g_table.add(a, b, c, n);
    }

    void sub(double const* a, double const* b, double* c, std::size_t n)
    {
        init_once();
        g_table.sub(a, b, c, n);
    }

    void mul(double const* a, double const* b, double* c, std::size_t n)
    {
        init_once();
        g_table.mul(a, b, c, n);
    }

    void axpy(double alpha, double const* x, double* y, std::size_t n)
    {
        init_once();
        g_table.axpy(alpha, x, y, n);
    }

    void axpby_mul(double alpha, double const* a, double const* b, double* y, std::size_t n)
    {
        init_once();
        g_table.axpby_mul(alpha, a, b, y, n);
    }

    void scale(double const* x, double alpha, double* y, std::size_t n)
    {
        init_once();
        g_table.scale(x, alpha, y, n);
    }

    double dot(double const* x, double const* y, std::size_t n)
    {
        init_once();
        return g_table.dot(x, y, n);
    }

    double sum(double const* x, std::size_t n)
    {
        init_once();
        return g_table.sum(x, n);
    }

    double sum_squares(double const* x, std::size_t n)
    {
        init_once();
        return g_table.sum_squares(x, n);
    }

    double max_value(double const* x, std::size_t n)
    {
        init_once();
        return g_table.max_value(x, n);
    }

    void vexp(double const* x, double* y, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
    }

    void vsigmoid(double const* x, double* y, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    }

    void vtanh(double const* x, double* y, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
    }

    void vrelu(double const* x, double* y, std::size_t n)
    {
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    }

}
