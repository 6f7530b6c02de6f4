#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fishdip::rng {

// splitmix64 finalizer: cheap, well-mixed 64-bit hash used to derive
// independent seeds. Every randomized component draws from its own named
// stream so adding or removing one consumer never shifts another's sequence.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t derive(std::uint64_t seed, std::string_view stream) {
  return splitmix64(seed ^ fnv1a(stream));
}

// Per-example seeds: generation of example i depends only on (seed, i).
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ index);
}

using Engine = std::mt19937_64;

inline Engine engine(std::uint64_t seed, std::string_view stream) {
  return Engine(derive(seed, stream));
}

inline Engine engine(std::uint64_t seed, std::uint64_t index) {
  return Engine(derive(seed, index));
}

}  // namespace fishdip::rng
