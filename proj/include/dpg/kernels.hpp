// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Dense matrix kernels. Each parallel kernel has a serial twin with the same
// per-element accumulation order, so results are bit-identical across thread
// counts. The serial versions are the reference used by tests and benchmarks.

#pragma once

#include <cstddef>
#include <span>

namespace dpg::kernels {

// C[m,n] = A[m,k] * B[k,n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);

// C[m,n] += A[m,k] * B[n,k]^T   (gradient wrt the left operand)
void matmul_add_bt(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_add_bt_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

// C[k,n] += A[m,k]^T * B[m,n]   (gradient wrt the right operand)
void matmul_add_at(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_add_at_serial(std::span<const double> a, std::span<const double> b,
                          std::span<double> c, std::size_t m, std::size_t k, std::size_t n);

// out[i] = tanh(in[i])
void tanh_map(std::span<const double> in, std::span<double> out);
void tanh_map_serial(std::span<const double> in, std::span<double> out);

int max_threads();

}  // namespace dpg::kernels
