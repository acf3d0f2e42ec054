#pragma once

#include <cstdint>
#include <random>

namespace csopt {

using Rng = std::mt19937_64;

// Stream ids used when splitting one master seed into independent streams.
enum class StreamId : std::uint64_t {
  kTrajectory = 1,
  kStopIndex = 2,
  kDiagnostics = 3,
  kProbes = 4,
};

// SplitMix64 finalizer (Stafford variant 13). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed derivation: fold each word into the running hash with splitmix64.
//   h0 = splitmix64(master)
//   h1 = splitmix64(h0 ^ a), h2 = splitmix64(h1 ^ b), h3 = splitmix64(h2 ^ c)
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

inline Rng make_stream(std::uint64_t seed, StreamId stream,
                       std::uint64_t replication = 0) {
  return Rng(mix_seed(seed, static_cast<std::uint64_t>(stream), replication));
}

// Uniform double in [0, 1) from the top 53 bits. Used instead of
// std::uniform_real_distribution so draws are identical across standard
// libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace csopt
