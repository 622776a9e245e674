#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "asmkit/shape.hpp"

namespace testing_support {

inline asmkit::Shape random_shape(std::mt19937_64& rng, std::size_t n, double spread = 1.0) {
  std::normal_distribution<double> normal(0.0, spread);
  std::vector<double> c(2 * n);
  for (auto& v : c) v = normal(rng);
  return asmkit::Shape(std::move(c));
}

inline std::vector<asmkit::Shape> random_shapes(std::uint64_t seed, std::size_t count, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<asmkit::Shape> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(random_shape(rng, n));
  return out;
}

// A base shape plus a few low-rank random deformations, so PCA has structure.
inline std::vector<asmkit::Shape> structured_shapes(std::uint64_t seed, std::size_t count, std::size_t n,
                                                    std::size_t rank = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> base(2 * n);
  for (auto& v : base) v = normal(rng);
  std::vector<std::vector<double>> dirs(rank, std::vector<double>(2 * n));
  for (auto& d : dirs)
    for (auto& v : d) v = normal(rng);
  std::vector<asmkit::Shape> out;
  for (std::size_t k = 0; k < count; ++k) {
    auto c = base;
    for (std::size_t r = 0; r < rank; ++r) {
      const double w = normal(rng) / static_cast<double>(r + 1);
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += 0.3 * w * dirs[r][i];
    }
    for (auto& v : c) v += 0.01 * normal(rng);
    out.emplace_back(std::move(c));
  }
  return out;
}

}  // namespace testing_support
