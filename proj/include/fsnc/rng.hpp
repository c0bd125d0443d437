#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace fsnc {

// Deterministic PRNG (xoshiro256**) with hand-rolled distributions.  The
// standard <random> distributions are implementation-defined, so every draw
// that feeds results goes through this class to keep outputs bit-stable
// across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (fresh pair per call, no cached spare).
  double normal();
  // Unbiased integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Bernoulli(p).
  bool flip(double p);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // `count` distinct indices drawn from [0, pop), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t pop, std::size_t count);

 private:
  std::uint64_t s_[4];
};

// One step of the splitmix64 sequence (also its finalizer — used for seeding
// and for hierarchical seed derivation).
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic seed tree: derive_seed(base, {a, b, ...}) folds each path
// component into the state so independent consumers (augmentations, dropout,
// episode sampling, probes, ...) never share a stream.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// Purpose tags for seed derivation paths.  Keeping them in one table makes
// accidental stream collisions impossible to write.
namespace seed_ns {
constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kRepeat = 2;
constexpr std::uint64_t kDevTasks = 3;
constexpr std::uint64_t kTestTasks = 4;
constexpr std::uint64_t kEpoch = 5;
constexpr std::uint64_t kAugmentA = 6;
constexpr std::uint64_t kAugmentB = 7;
constexpr std::uint64_t kDropout = 8;
constexpr std::uint64_t kNegatives = 9;
constexpr std::uint64_t kHead = 10;
constexpr std::uint64_t kProbe = 11;
constexpr std::uint64_t kClustering = 12;
constexpr std::uint64_t kSbm = 13;
constexpr std::uint64_t kTask = 14;
constexpr std::uint64_t kTrainEpisode = 15;
}  // namespace seed_ns

}  // namespace fsnc
