#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cdrscore {

using Engine = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent seed for a named stage from the master seed, so that
// every source of randomness in a run can be replayed on its own.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(master ^ mix64(h));
}

constexpr std::uint64_t substream_seed(std::uint64_t master, std::string_view name,
                                       std::uint64_t index) noexcept {
  return mix64(substream_seed(master, name) + mix64(index + 1));
}

inline Engine make_engine(std::uint64_t master, std::string_view name) {
  return Engine{substream_seed(master, name)};
}

inline Engine make_engine(std::uint64_t master, std::string_view name, std::uint64_t index) {
  return Engine{substream_seed(master, name, index)};
}

inline double uniform01(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace cdrscore
