#pragma once

#include <cstdint>
#include <random>

namespace qdata {

// std::mt19937_64 output is fully specified by the standard; the std
// distributions are not, so bounded draws go through the helpers below to
// keep traces byte-identical across standard libraries.
using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent streams from
// (seed, stream, index) without carrying generator state around.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept
{
  return mix64(mix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept
{
  return mix64(mix64(a, b), c);
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double unit_real(std::uint64_t bits) noexcept
{
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng)
{
  return unit_real(rng());
}

// Uniform integer in [0, n). Rejection sampling, n > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n)
{
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Stateless variant for per-index draws; the modulo bias is below 2^-40
// for every n used in this library.
constexpr std::uint64_t pick_below(std::uint64_t bits, std::uint64_t n) noexcept
{
  return bits % n;
}

} // namespace qdata
