#pragma once

#include <cstdint>
#include <random>

namespace yb {

// One reproducible generator per (master_seed, stream_id). The mt19937_64 raw
// output sequence is pinned by the standard; the bounded and unit mappings
// are hand-rolled here because std::uniform_*_distribution is free to differ
// between standard libraries, and snapshot files must be byte-identical for
// a given seed.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, bound), bias-free via rejection. bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound);

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [-magnitude, magnitude].
  double next_symmetric(double magnitude) {
    return (2.0 * next_unit() - 1.0) * magnitude;
  }

 private:
  std::mt19937_64 engine_;
};

// Stream-id layout used by the pipelines: ensemble file i draws from stream i,
// the perturbation of file i from kPerturbStreamBase + i, and the simulate
// command from kSimulateStream.
inline constexpr std::uint64_t kPerturbStreamBase = std::uint64_t{1} << 32;
inline constexpr std::uint64_t kSimulateStream = std::uint64_t{1} << 33;

}  // namespace yb
