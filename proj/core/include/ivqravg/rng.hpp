#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ivqr {

using Engine = std::mt19937_64;

//! splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

//! Hash of a key path such as (seed, dgp, tau index, replication).
constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) noexcept
{
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p));
  return h;
}

//! Independent engine for a key path. Equal keys give identical streams.
inline Engine keyed_engine(std::initializer_list<std::uint64_t> parts)
{
  const std::uint64_t k = stream_key(parts);
  std::seed_seq seq{static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32),
                    static_cast<std::uint32_t>(mix64(k)), static_cast<std::uint32_t>(mix64(k) >> 32)};
  return Engine(seq);
}

} // namespace ivqr
