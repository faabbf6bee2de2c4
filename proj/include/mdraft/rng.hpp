#ifndef MDRAFT_RNG_HPP
#define MDRAFT_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <span>

namespace mdraft {

// splitmix64 finalizer. Every random draw in the system flows from the run's
// root seed through derive_seed, so results depend only on the derivation
// path, never on scheduling or call order.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (0x9e3779b97f4a7c15ull + b + (a << 6) + (a >> 2)));
}

// Stream tags keep unrelated consumers of the same root seed independent.
enum class StreamTag : std::uint64_t {
  init = 1,
  task = 2,
  generation = 3,
  evaluation = 4,
  batch_order = 5,
  validation = 6,
  validation_eval = 7,
  reward_model = 8,
};

inline std::uint64_t derive_seed(std::uint64_t root, StreamTag tag,
                                 std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t s = combine_seed(mix64(root), static_cast<std::uint64_t>(tag));
  for (std::uint64_t p : path) s = combine_seed(s, p);
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inclusive range, bias negligible for the small bounds used here.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t bound = static_cast<std::uint64_t>(hi - lo + 1);
    const auto wide = static_cast<unsigned __int128>(next_u64());
    return lo + static_cast<std::int64_t>((wide * bound) >> 64);
  }

  // Box-Muller; draws two uniforms per call, no spare caching.
  double gaussian(double mean, double stddev);

  // Index proportional to weights (need not be normalized). Weights must be
  // non-negative with a positive sum.
  int categorical(std::span<const double> weights);

 private:
  std::uint64_t state_;
};

}  // namespace mdraft

#endif  // MDRAFT_RNG_HPP
