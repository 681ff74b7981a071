#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace compre {

// Portable sampling helpers. The engine (mt19937_64) is fully specified by the
// standard; the std:: distributions are not, so every draw that feeds a
// reproducible artifact goes through these instead.

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Engine seeded from a 64-bit seed mixed with a string key (e.g. an item id).
std::mt19937_64 keyed_engine(std::uint64_t seed, std::string_view key);

// Uniform integer in [0, bound). bound must be > 0.
std::uint64_t uniform_below(std::mt19937_64& engine, std::uint64_t bound);

// Uniform real in [0, 1) with 53 bits of precision.
double uniform_unit(std::mt19937_64& engine);

double standard_normal(std::mt19937_64& engine);

template <typename It>
void portable_shuffle(It first, It last, std::mt19937_64& engine) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_below(engine, i);
    std::iter_swap(first + static_cast<std::ptrdiff_t>(i - 1), first + static_cast<std::ptrdiff_t>(j));
  }
}

}  // namespace compre
