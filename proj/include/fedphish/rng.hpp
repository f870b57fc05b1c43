#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace fedphish {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic random source. The mt19937_64 engine output is pinned by the
// standard; the helpers below replace std::uniform_*_distribution, whose
// mapping from engine output is implementation-defined and therefore not
// reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n). n must be >= 1.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool coin() { return (next_u64() & 1ull) != 0; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Purpose tags for deriving independent streams from one experiment seed.
// Streams are keyed by (seed, tag, a, b) so that, e.g., client 3's shuffle
// order in round 7 never depends on how many other clients ran before it.
enum class Stream : std::uint64_t {
  ModelInit = 1,
  Shuffle = 2,
  Selection = 3,
  Partition = 4,
  Split = 5,
  Corpus = 6,
  Embedding = 7,
  Eval = 8,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s ^= 0x517cc1b727220a95ull * static_cast<std::uint64_t>(tag);
  h ^= splitmix64(s);
  s ^= 0x2545f4914f6cdd1dull * (a + 1);
  h ^= splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ull * (b + 1);
  h ^= splitmix64(s);
  return h;
}

inline Rng derive_rng(std::uint64_t seed, Stream tag, std::uint64_t a = 0,
                      std::uint64_t b = 0) {
  return Rng(derive_seed(seed, tag, a, b));
}

// FNV-1a, used for config fingerprints and trajectory checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::vector<double>& v,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(v.data(), v.size() * sizeof(double), h);
}

}  // namespace fedphish
