// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dpg::kernels {

namespace {
// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1u << 15;

inline void matmul_row(const double* a, const double* b, double* c, std::size_t k,
                       std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) c[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = a[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}

inline void matmul_add_bt_row(const double* a, const double* b, double* c, std::size_t k,
                              std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a[p] * brow[p];
    c[j] += s;
  }
}

inline void matmul_add_at_row(const double* a, const double* b, double* c, std::size_t m,
                              std::size_t k, std::size_t n, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    if (av == 0.0) continue;
    const double* brow = b + i * n;
    for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
  }
}
}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (long i = 0; i < rows; ++i) {
    matmul_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) matmul_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
}

void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (long i = 0; i < rows; ++i) {
    matmul_add_bt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void matmul_add_bt_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    matmul_add_bt_row(a.data() + i * k, b.data(), c.data() + i * n, k, n);
  }
}

void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  const long outer = static_cast<long>(k);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelWork)
  for (long p = 0; p < outer; ++p) {
    matmul_add_at_row(a.data(), b.data(), c.data() + p * n, m, k, n, static_cast<std::size_t>(p));
  }
}

void matmul_add_at_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) matmul_add_at_row(a.data(), b.data(), c.data() + p * n, m, k, n, p);
}

void tanh_map(std::span<const double> in, std::span<double> out) {
  const long len = static_cast<long>(in.size());
#pragma omp parallel for schedule(static) if (in.size() >= kParallelWork / 8)
  for (long i = 0; i < len; ++i) out[i] = std::tanh(in[i]);
}

void tanh_map_serial(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace dpg::kernels
