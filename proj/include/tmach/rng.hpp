#pragma once

#include <cstdint>
#include <random>

namespace tmach {

/// Independent generator for one named purpose derived from a root seed.
/// Streams with different ids never share state, so adding a consumer does not
/// perturb the draws seen by the others.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

// Stream ids used across the library.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kSynthParams = 3;
inline constexpr std::uint64_t kSynthRows = 4;
inline constexpr std::uint64_t kSynthNoise = 5;
inline constexpr std::uint64_t kFolds = 6;
inline constexpr std::uint64_t kSubsample = 7;
inline constexpr std::uint64_t kSigns = 8;
inline constexpr std::uint64_t kProjection = 9;
inline constexpr std::uint64_t kRestarts = 10;
}  // namespace stream

}  // namespace tmach
