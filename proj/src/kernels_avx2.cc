// AVX2+FMA lane. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here runs unless the runtime CPU check passes.

#include "hstgnn/kernels.h"
#include "kernels_table.h"

#include <cstring>
#include <immintrin.h>

namespace kernels {

    namespace avx2 {

        namespace {

            inline double hsum(__m256d v)
            {
                __m128d lo = _mm256_castpd256_pd128(v);
                __m128d hi = _mm256_extractf128_pd(v, 1);
                lo = _mm_add_pd(lo, hi);
                __m128d swapped = _mm_unpackhi_pd(lo, lo);
                return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
            }

            // crow += aik * brow, length m
            inline void fma_row(double aik, double const* brow, double* crow, std::size_t m)
            {
                __m256d va = _mm256_set1_pd(aik);
                std::size_t j = 0;
                for (; j + 4 <= m; j += 4) {
                    __m256d vb = _mm256_loadu_pd(brow + j);
                    __m256d vc = _mm256_loadu_pd(crow + j);
                    _mm256_storeu_pd(crow + j, _mm256_fmadd_pd(va, vb, vc));
                }
                for (; j < m; ++j) {
                    crow[j] += aik * brow[j];
                }
            }

            void k_matmul_acc(double const* a, double const* b, double* c,
                std::size_t n, std::size_t k, std::size_t m)
            {
                for (std::size_t i = 0; i < n; ++i) {
                    double const* arow = a + i * k;
                    double* crow = c + i * m;
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        fma_row(arow[kk], b + kk * m, crow, m);
                    }
                }
            }

            void k_matmul(double const* a, double const* b, double* c,
                std::size_t n, std::size_t k, std::size_t m)
            {
                std::memset(c, 0, n * m * sizeof(double));
                k_matmul_acc(a, b, c, n, k, m);
            }

            inline double row_dot(double const* x, double const* y, std::size_t k)
            {
                __m256d acc0 = _mm256_setzero_pd();
                __m256d acc1 = _mm256_setzero_pd();
                std::size_t kk = 0;
                for (; kk + 8 <= k; kk += 8) {
                    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + kk), _mm256_loadu_pd(y + kk), acc0);
                    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + kk + 4), _mm256_loadu_pd(y + kk + 4), acc1);
                }
                for (; kk + 4 <= k; kk += 4) {
                    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + kk), _mm256_loadu_pd(y + kk), acc0);
                }
                double s = hsum(_mm256_add_pd(acc0, acc1));
                for (; kk < k; ++kk) {
                    s += x[kk] * y[kk];
                }
                return s;
            }

            void k_matmul_nt(double const* a, double const* b, double* c,
                std::size_t n, std::size_t k, std::size_t m)
            {
                for (std::size_t i = 0; i < n; ++i) {
                    double const* arow = a + i * k;
                    for (std::size_t j = 0; j < m; ++j) {
                        c[i * m + j] = row_dot(arow, b + j * k, k);
                    }
                }
            }

            void k_matmul_nt_acc(double const* a, double const* b, double* c,
                std::size_t n, std::size_t k, std::size_t m)
            {
                for (std::size_t i = 0; i < n; ++i) {
                    double const* arow = a + i * k;
                    for (std::size_t j = 0; j < m; ++j) {
                        c[i * m + j] += row_dot(arow, b + j * k, k);
                    }
                }
            }

            void k_matmul_tn_acc(double const* a, double const* b, double* c,
                std::size_t n, std::size_t k, std::size_t m)
            {
                for (std::size_t r = 0; r < n; ++r) {
                    double const* arow = a + r * k;
                    double const* brow = b + r * m;
                    for (std::size_t i = 0; i < k; ++i) {
                        if (arow[i] == 0.0) {
                            continue;
                        }
                        fma_row(arow[i], brow, c + i * m, m);
                    }
                }
            }

            void k_add(double const* a, double const* b, double* c, std::size_t n)
            {
                std::size_t i = 0;
                for (; i + 4 <= n; i += 4) {
                    _mm256_storeu_pd(c + i,
                        _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
                }
                for (; i < n; ++i) c[i] = a[i] + b[i];
            }

            void k_sub(double const* a, double const* b, double* c, std::size_t n)
            {
                std::size_t i = 0;
                for (; i + 4 <= n; i += 4) {
                    _mm256_storeu_pd(c + i,
                        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
                }
                for (; i < n; ++i) c[i] = a[i] - b[i];
            }

            void k_mul(double const* a, double const* b, double* c, std::size_t n)
            {
                std::size_t i = 0;
                for (; i + 4 <= n; i += 4) {
                    _mm256_storeu_pd(c + i,
                        _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
                }
                for (; i < n; ++i) c[i] = a[i] * b[i];
            }

            void k_axpy(double alpha, double const* x, double* y, std::size_t n)
            {
                fma_row(alpha, x, y, n);
            }

            void k_axpby_mul(double alpha, double const* a, double const* b, double* y, std::size_t n)
            {
                __m256d va = _mm256_set1_pd(alpha);
                std::size_t i = 0;
                for (; i + 4 <= n; i += 4) {
                    __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
                    __m256d vy = _mm256_loadu_pd(y + i);
                    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, prod, vy));
                }
                for (; i < n; ++i) y[i] += alpha * a[i] * b[i];
            }

            void k_scale(double const* x, double alpha, double* y, std::size_t n)
            {
                __m256d va = _mm256_set1_pd(alpha);
                std::size_t i = 0;
                for (; i + 4 <= n; i += 4) {
                    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
                }
                for (; i < n; ++i) y[i] = alpha * x[i];
            }

            double k_dot(double const* x, double const* y, std::size_t n)
            {
                return row_dot(x, y, n);
            }

            double k_sum(double const* x, std::size_t n)
            {
                __m256d acc = _mm256_setzero_pd();
                std::size_t i = 0;
                for (; i + 4 <= n; i += 4) {
                    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
                }
                double s = hsum(acc);
                for (; i < n; ++i) s += x[i];
                return s;
            }

            double k_sum_squares(double const* x, std::size_t n)
            {
                return row_dot(x, x, n);
            }

            double k_max_value(double const* x, std::size_t n)
            {
                double m = x[0];
                std::size_t i = 1;
                if (n >= 5) {
                    __m256d vm = _mm256_loadu_pd(x);
                    for (i = 4; i + 4 <= n; i += 4) {
                        vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
                    }
                    double lanes[4];
                    _mm256_storeu_pd(lanes, vm);
                    m = lanes[0];
                    for (int l = 1; l < 4; ++l) {
                        if (lanes[l] > m) m = lanes[l];
                    }
                }
                for (; i < n; ++i) {
                    if (x[i] > m) m = x[i];
                }
                return m;
            }

        }

        bool cpu_supported()
        {
#if defined(__x86_64__) || defined(__i386__)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        }

        void fill_table(dispatch_table& t)
        {
            t.matmul = &k_matmul;
            t.matmul_acc = &k_matmul_acc;
            t.matmul_nt = &k_matmul_nt;
            t.matmul_nt_acc = &k_matmul_nt_acc;
            t.matmul_tn_acc = &k_matmul_tn_acc;
            t.add = &k_add;
            t.sub = &k_sub;
            t.mul = &k_mul;
            t.axpy = &k_axpy;
            t.axpby_mul = &k_axpby_mul;
            t.scale = &k_scale;
            t.dot = &k_dot;
            t.sum = &k_sum;
            t.sum_squares = &k_sum_squares;
            t.max_value = &k_max_value;
        }

    }

}
