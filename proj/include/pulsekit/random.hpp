#pragma once

#include <cstdint>
#include <random>

namespace pulsekit {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for an independent sub-stream of `master`. Distinct `stream` ids give
/// statistically unrelated generators, so e.g. the noise stream can change
/// without perturbing the arrival stream.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

namespace stream {
inline constexpr std::uint64_t arrivals = 1;
inline constexpr std::uint64_t amplitudes = 2;
inline constexpr std::uint64_t noise = 3;
}  // namespace stream

}  // namespace pulsekit
