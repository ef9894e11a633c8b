#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sgnep {

/// Name recorded in run artifacts so a reader can reproduce the streams.
inline constexpr std::string_view kGeneratorName = "mt19937_64/seed_seq(seed_lo,seed_hi,stream)";

/// Independent stream `stream` derived from a master seed. Uniform variates
/// are built from the top 53 bits so values do not depend on the standard
/// library's distribution implementation.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// Stream ids reserved by the solver. Agent i uses stream i.
namespace streams {
inline constexpr std::uint64_t kOffsets = 1ULL << 32;
inline constexpr std::uint64_t kMonitor = (1ULL << 32) + 1;
inline constexpr std::uint64_t kMarketDraw = (1ULL << 32) + 2;
inline constexpr std::uint64_t kReferenceSamples = (1ULL << 32) + 3;
inline constexpr std::uint64_t kRealizations = (1ULL << 32) + 4;
inline constexpr std::uint64_t kProbe = (1ULL << 32) + 5;
inline constexpr std::uint64_t kExpectation = (1ULL << 32) + 6;
}  // namespace streams

}  // namespace sgnep
