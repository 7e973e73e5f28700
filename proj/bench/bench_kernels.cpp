// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Serial vs OpenMP timings of the dense kernels, plus one training step.
// Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "dpg/config.hpp"
#include "dpg/kernels.hpp"
#include "dpg/rng.hpp"
#include "dpg/trainer.hpp"

namespace {

double time_ms(int repeats, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / repeats;
}

std::vector<double> random_vec(std::size_t n, const char* label) {
  dpg::RngStream rng(1, label);
  std::vector<double> v(n);
  for (double& x : v) x = rng.gaussian();
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 20;
  std::printf("threads=%d repeats=%d\n", dpg::kernels::max_threads(), repeats);
  std::printf("%-14s %6s %6s %6s %12s %12s %8s %s\n", "kernel", "m", "k", "n", "serial_ms",
              "parallel_ms", "speedup", "identical");

  const std::size_t shapes[][3] = {{16, 160, 128}, {64, 128, 128}, {256, 256, 256}, {512, 512, 512}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_vec(m * k, "a");
    const auto b = random_vec(k * n, "b");
    std::vector<double> c1(m * n), c2(m * n);
    const double ts = time_ms(repeats, [&] { dpg::kernels::matmul_serial(a, b, c1, m, k, n); });
    const double tp = time_ms(repeats, [&] { dpg::kernels::matmul(a, b, c2, m, k, n); });
    std::printf("%-14s %6zu %6zu %6zu %12.4f %12.4f %8.2f %s\n", "matmul", m, k, n, ts, tp, ts / tp,
                c1 == c2 ? "yes" : "NO");

    const auto g = random_vec(m * n, "g");
    std::vector<double> d1(k * n, 0.0), d2(k * n, 0.0);
    const double as = time_ms(repeats, [&] { dpg::kernels::matmul_add_at_serial(a, g, d1, m, k, n); });
    const double ap = time_ms(repeats, [&] { dpg::kernels::matmul_add_at(a, g, d2, m, k, n); });
    std::printf("%-14s %6zu %6zu %6zu %12.4f %12.4f %8.2f %s\n", "matmul_add_at", m, k, n, as, ap,
                as / ap, d1 == d2 ? "yes" : "NO");
  }

  dpg::Json cfg = dpg::default_config();
  dpg::apply_override(cfg, "trainer.steps=20");
  dpg::apply_override(cfg, "trainer.eval_every=1000");
  const dpg::Experiment exp = dpg::build_experiment(cfg);
  const double step_ms = time_ms(1, [&] { dpg::train_dpg(exp); }) / 20.0;
  std::printf("train_dpg default config: %.3f ms/step\n", step_ms);
  return 0;
}
