#ifndef SHRINKLAB_TESTS_TEST_UTIL_HPP_
#define SHRINKLAB_TESTS_TEST_UTIL_HPP_

#include <cstdint>

#include "shrinklab/core.hpp"
#include "shrinklab/rng.hpp"

namespace testutil {

using shrinklab::Matrix;
using shrinklab::Vector;

inline Matrix random_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed, double scale = 1.0) {
  auto eng = shrinklab::make_engine(shrinklab::RngSeed{seed}, shrinklab::StreamRole::points, {0xbeef});
  Matrix m(n, p);
  shrinklab::fill_standard_normal(m, eng);
  return scale * m;
}

inline Matrix random_orthogonal(Eigen::Index n, std::uint64_t seed) {
  auto eng = shrinklab::make_engine(shrinklab::RngSeed{seed}, shrinklab::StreamRole::haar, {0xbeef});
  return shrinklab::haar_column_orthonormal(n, n, eng);
}

inline Matrix padded(const std::vector<double>& sigma, Eigen::Index n) {
  const auto p = static_cast<Eigen::Index>(sigma.size());
  Matrix m = Matrix::Zero(n, p);
  for (Eigen::Index i = 0; i < p; ++i) m(i, i) = sigma[static_cast<std::size_t>(i)];
  return m;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testutil

#endif  // SHRINKLAB_TESTS_TEST_UTIL_HPP_
