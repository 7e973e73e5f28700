// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dpg {

namespace {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t draw(std::uint64_t key, std::uint64_t counter, std::uint64_t lane) {
  return mix64(mix64(key ^ mix64(counter)) + lane * 0xd1b54a32d192ed03ULL);
}

inline double to_open_unit(std::uint64_t bits) {
  // 53 random bits mapped to the open interval (0, 1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::uint64_t hash_label(const std::string& label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string label, std::uint64_t counter)
    : seed_(seed), label_(std::move(label)), counter_(counter) {
  key_ = mix64(mix64(seed_) ^ hash_label(label_));
}

RngStream RngStream::fork(const std::string& suffix) const {
  return RngStream(seed_, label_ + "/" + suffix, 0);
}

std::uint64_t RngStream::next_u64() { return draw(key_, counter_++, 0); }

double RngStream::uniform() { return to_open_unit(next_u64()); }

std::uint64_t RngStream::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int: empty range");
  // Multiply-shift; bias is below 2^-64 * n and irrelevant at these sizes.
  const auto bits = next_u64();
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits) * n) >> 64);
}

double RngStream::gaussian() {
  const std::uint64_t c = counter_++;
  const double u1 = to_open_unit(draw(key_, c, 1));
  const double u2 = to_open_unit(draw(key_, c, 2));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor draw_gaussian(RngStream& stream, const Shape& shape) {
  Tensor out(shape);
  for (double& v : out.data()) v = stream.gaussian();
  return out;
}

}  // namespace dpg
