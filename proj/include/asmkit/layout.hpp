#pragma once

#include <cstddef>

#include "asmkit/error.hpp"

namespace asmkit {

/// Where the two eye clusters sit in a landmark layout.
///
/// 68-point (300W) layouts use 36..41 / 42..47 with outer corners 36 and 45;
/// 98-point (WFLW) layouts use 60..67 / 68..75 with outer corners 60 and 72.
/// Any other n >= 12 reserves the last 8 indices for two 4-point clusters.
/// Below 12 points there are no clusters and indices 0 and n/2 act as corners.
struct EyeLayout {
  std::size_t left_start = 0;
  std::size_t right_start = 0;
  std::size_t cluster_size = 0;  // 0 => no eye clusters
  std::size_t left_outer = 0;
  std::size_t right_outer = 0;

  bool is_eye(std::size_t i) const noexcept {
    return cluster_size > 0 && ((i >= left_start && i < left_start + cluster_size) ||
                                (i >= right_start && i < right_start + cluster_size));
  }
};

inline EyeLayout eye_layout(std::size_t n_points) {
  if (n_points < 3) throw InvalidConfig("a layout needs at least 3 points");
  auto clusters = [](std::size_t left, std::size_t right, std::size_t size) {
    return EyeLayout{left, right, size, left, right + size / 2};
  };
  if (n_points == 68) return clusters(36, 42, 6);
  if (n_points == 98) return clusters(60, 68, 8);
  if (n_points >= 12) return clusters(n_points - 8, n_points - 4, 4);
  return EyeLayout{0, 0, 0, 0, n_points / 2};
}

}  // namespace asmkit
