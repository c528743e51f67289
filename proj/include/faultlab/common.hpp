#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace faultlab {

/// Invalid argument or configuration supplied by the caller.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data. Carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

inline constexpr int kNumClasses = 8;

/// floor(x + 0.5); the single rounding rule used for every pixel conversion.
inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a (stream, index) pair.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

/// Well-known stream ids for derive_seed.
namespace stream {
inline constexpr std::uint64_t kShadowing = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kForestBootstrap = 3;
inline constexpr std::uint64_t kForestTree = 4;
inline constexpr std::uint64_t kCnnInit = 5;
inline constexpr std::uint64_t kCnnShuffle = 6;
inline constexpr std::uint64_t kNefEnsemble = 7;
inline constexpr std::uint64_t kNefProjection = 8;
inline constexpr std::uint64_t kGradcheck = 9;
}  // namespace stream

/// mt19937_64 with platform-independent conversions to doubles and indices
/// (the std distributions are implementation-defined, so none are used).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second variate).
  double normal();

private:
  std::mt19937_64 engine_;
};

/// Runs body(i) for i in [0, n) on up to `threads` workers using a static
/// contiguous partition. Bodies must only write to per-index state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Resolves a thread-count setting: 0 means hardware concurrency.
unsigned resolve_threads(unsigned requested);

}  // namespace faultlab
