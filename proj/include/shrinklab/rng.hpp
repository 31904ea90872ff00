#ifndef SHRINKLAB_RNG_HPP_
#define SHRINKLAB_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>
#include <boost/random/normal_distribution.hpp>

namespace shrinklab {

struct RngSeed {
  std::uint64_t value = 0;
};

// Distinguishes independent streams derived from one user seed.
enum class StreamRole : std::uint64_t {
  observation = 0x6f6273,
  chain = 0x636861,
  future = 0x667574,
  sphere = 0x737068,
  inner = 0x696e6e,
  haar = 0x686161,
  importance = 0x696d70,
  points = 0x707473,
};

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hash (seed, keys...) into a fresh seed. Streams keyed by different
/// paths are statistically independent, and the result does not depend
/// on the order in which streams are consumed.
inline RngSeed derive_seed(RngSeed seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed.value);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return RngSeed{h};
}

inline RngSeed derive_seed(RngSeed seed, StreamRole role, std::initializer_list<std::uint64_t> keys = {}) {
  RngSeed s = derive_seed(seed, {static_cast<std::uint64_t>(role)});
  return keys.size() ? derive_seed(s, keys) : s;
}

inline Engine make_engine(RngSeed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32)};
  return Engine(seq);
}

inline Engine make_engine(RngSeed seed, StreamRole role, std::initializer_list<std::uint64_t> keys = {}) {
  return make_engine(derive_seed(seed, role, keys));
}

template <class Derived, class Eng>
void fill_standard_normal(Eigen::DenseBase<Derived>& out, Eng& eng) {
  boost::random::normal_distribution<double> normal;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal(eng);
}

template <class Eng>
double uniform01(Eng& eng) {
  return std::generate_canonical<double, 53>(eng);
}

}  // namespace shrinklab

#endif  // SHRINKLAB_RNG_HPP_
