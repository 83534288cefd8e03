#pragma once

#include <cstdint>
#include <random>

namespace perfsmooth {

/// Deterministic pseudo-random source.
///
/// Backed by std::mt19937_64 seeded with a single 64-bit word, so a given
/// seed reproduces the same draws on every conforming standard library.
/// Substream `i` of a stream with seed `s` is seeded with
/// splitmix64(s ^ splitmix64(i + 1)); substreams of distinct indices are
/// treated as independent. uniform() uses the top 53 bits of one engine word.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    RngStream substream(std::uint64_t index) const;

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Normal draw. Bit-reproducible for a fixed standard library only.
    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    std::uint64_t next_word() { return engine_(); }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace perfsmooth
