#pragma once

// Deterministic random-number plumbing.
//
// Every randomized component in the library draws from a substream derived
// from one root seed plus a structured path (purpose, epoch, worker, chunk).
// Substream derivation is a pure function, so any stream of tuples, any
// block sample and any shuffled buffer is reproducible from (config, seed)
// alone, independent of thread scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace corgi::rng {

// Labels for the independent randomness consumers. Values are part of the
// substream derivation and must stay stable.
enum class Purpose : std::uint64_t {
  BlockOrder = 1,    // block sampling / block permutations
  TupleShuffle = 2,  // in-buffer tuple shuffles and epoch permutations
  Window = 3,        // sliding-window occupant picks
  Reservoir = 4,     // reservoir admission decisions
  LoopBuffer = 5,    // looping-buffer picks
  Synthesis = 6,     // synthetic data generation
  FullShuffle = 7,   // one-shot materialized shuffles
  Bench = 8,         // benchmark access patterns
};

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used only for seed mixing.
inline std::uint64_t sm64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Substream seed = fold of the path words into the root via SplitMix64.
// Divergent paths give independent-looking seeds; identical paths collide
// by construction, which is exactly the reproducibility contract.
inline std::uint64_t substream_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = sm64(root);
  for (std::uint64_t v : path) h = sm64(h ^ sm64(v));
  return h;
}

inline std::mt19937_64 engine(std::uint64_t root, Purpose purpose,
                              std::uint64_t epoch = 0, std::uint64_t worker = 0,
                              std::uint64_t chunk = 0) {
  return std::mt19937_64(substream_seed(
      root, {static_cast<std::uint64_t>(purpose), epoch, worker, chunk}));
}

// Unbiased uniform draw from [0, bound). Rejection sampling on the low end:
// accept x >= 2^64 mod bound, then reduce.
inline std::uint64_t uniform_below(std::mt19937_64& g, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  std::uint64_t x;
  do {
    x = g();
  } while (x < threshold);
  return x % bound;
}

// In-place Fisher-Yates. With k < v.size() only the first k slots are
// finalized (partial shuffle): v[0..k) is then a uniformly ordered k-subset.
template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& g,
                  std::size_t k = static_cast<std::size_t>(-1)) {
  const std::size_t n = v.size();
  if (n < 2) return;
  const std::size_t last = (k >= n) ? n - 1 : k;
  for (std::size_t i = 0; i < last; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_below(
                                  g, static_cast<std::uint64_t>(n - i)));
    using std::swap;
    swap(v[i], v[j]);
  }
}

// Uniformly ordered n-subset of {0, .., N-1} (order is itself uniform).
inline std::vector<std::uint64_t> sample_without_replacement(
    std::uint64_t N, std::uint64_t n, std::mt19937_64& g) {
  std::vector<std::uint64_t> ids(N);
  for (std::uint64_t i = 0; i < N; ++i) ids[i] = i;
  fisher_yates(ids, g, static_cast<std::size_t>(n));
  ids.resize(n);
  return ids;
}

}  // namespace corgi::rng
