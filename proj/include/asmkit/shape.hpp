#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asmkit/error.hpp"

namespace asmkit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// An ordered set of n 2-D landmarks stored flat as (x1, y1, x2, y2, ..., xn, yn).
class Shape {
 public:
  Shape() = default;

  explicit Shape(std::vector<double> coords) : coords_(std::move(coords)) { validate(); }

  static Shape from_points(std::span<const Point2> points) {
    std::vector<double> c;
    c.reserve(points.size() * 2);
    for (const auto& p : points) {
      c.push_back(p.x);
      c.push_back(p.y);
    }
    return Shape(std::move(c));
  }

  std::size_t n_points() const noexcept { return coords_.size() / 2; }
  std::size_t dim() const noexcept { return coords_.size(); }

  Point2 point(std::size_t i) const { return {coords_[2 * i], coords_[2 * i + 1]}; }
  void set_point(std::size_t i, Point2 p) {
    coords_[2 * i] = p.x;
    coords_[2 * i + 1] = p.y;
  }

  std::span<const double> coords() const noexcept { return coords_; }
  const std::vector<double>& flat() const noexcept { return coords_; }

  Point2 centroid() const {
    Point2 c;
    const auto n = static_cast<double>(n_points());
    for (std::size_t i = 0; i < n_points(); ++i) {
      c.x += coords_[2 * i];
      c.y += coords_[2 * i + 1];
    }
    c.x /= n;
    c.y /= n;
    return c;
  }

  /// Root-mean-square distance of the points from their centroid.
  double rms_radius() const {
    const auto c = centroid();
    double s = 0.0;
    for (std::size_t i = 0; i < n_points(); ++i) {
      const double dx = coords_[2 * i] - c.x;
      const double dy = coords_[2 * i + 1] - c.y;
      s += dx * dx + dy * dy;
    }
    return std::sqrt(s / static_cast<double>(n_points()));
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  void validate() const {
    if (coords_.size() % 2 != 0) throw ShapeMismatch("shape has an odd number of coordinates");
    if (coords_.size() < 6) throw ShapeMismatch("shape needs at least 3 points");
    for (double v : coords_) {
      if (!std::isfinite(v)) throw ShapeMismatch("shape has a non-finite coordinate");
    }
  }

  std::vector<double> coords_;
};

inline void require_same_size(const Shape& a, const Shape& b) {
  if (a.n_points() != b.n_points()) {
    throw ShapeMismatch("point count mismatch: " + std::to_string(a.n_points()) + " vs " +
                        std::to_string(b.n_points()));
  }
}

/// x -> scale * R(rotation) * x + translation.
struct SimilarityTransform {
  double scale = 1.0;
  double rotation = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;

  Point2 apply(Point2 p) const {
    const double c = scale * std::cos(rotation);
    const double s = scale * std::sin(rotation);
    return {c * p.x - s * p.y + tx, s * p.x + c * p.y + ty};
  }

  Shape apply(const Shape& shape) const {
    std::vector<double> out(shape.dim());
    const double c = scale * std::cos(rotation);
    const double s = scale * std::sin(rotation);
    const auto in = shape.coords();
    for (std::size_t i = 0; i < shape.n_points(); ++i) {
      const double x = in[2 * i];
      const double y = in[2 * i + 1];
      out[2 * i] = c * x - s * y + tx;
      out[2 * i + 1] = s * x + c * y + ty;
    }
    return Shape(std::move(out));
  }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = -rotation;
    // -(1/s) R^T t
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    inv.tx = -(c * tx + s * ty) / scale;
    inv.ty = -(-s * tx + c * ty) / scale;
    return inv;
  }
};

/// Least-squares similarity transform mapping `source` onto `target`.
inline SimilarityTransform similarity_fit(const Shape& source, const Shape& target) {
  require_same_size(source, target);
  const auto cs = source.centroid();
  const auto ct = target.centroid();
  const auto a = source.coords();
  const auto b = target.coords();

  // With complex numbers a_i, b_i (centered), the optimum is z = sum(conj(a) b) / sum|a|^2.
  double re = 0.0, im = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < source.n_points(); ++i) {
    const double ax = a[2 * i] - cs.x, ay = a[2 * i + 1] - cs.y;
    const double bx = b[2 * i] - ct.x, by = b[2 * i + 1] - ct.y;
    re += ax * bx + ay * by;
    im += ax * by - ay * bx;
    norm += ax * ax + ay * ay;
  }
  if (!(norm > 0.0)) throw DegenerateShape("similarity_fit: source points are all coincident");

  SimilarityTransform t;
  const double zr = re / norm;
  const double zi = im / norm;
  t.scale = std::hypot(zr, zi);
  if (!(t.scale > 0.0)) throw DegenerateShape("similarity_fit: target points are all coincident");
  t.rotation = std::atan2(zi, zr);
  t.tx = ct.x - (zr * cs.x - zi * cs.y);
  t.ty = ct.y - (zi * cs.x + zr * cs.y);
  return t;
}

/// Translates to centroid (0,0) and scales to RMS radius 1.
inline Shape normalize_shape(const Shape& shape) {
  const auto c = shape.centroid();
  const double r = shape.rms_radius();
  if (!(r > 0.0)) throw DegenerateShape("cannot normalize a shape with coincident points");
  std::vector<double> out(shape.dim());
  const auto in = shape.coords();
  for (std::size_t i = 0; i < shape.n_points(); ++i) {
    out[2 * i] = (in[2 * i] - c.x) / r;
    out[2 * i + 1] = (in[2 * i + 1] - c.y) / r;
  }
  return Shape(std::move(out));
}

struct Alignment {
  std::vector<Shape> aligned;
  std::vector<SimilarityTransform> transforms;  // shape i -> common frame
  Shape mean;
  int iterations = 0;
};

/// Generalized Procrustes alignment of a shape collection to its evolving mean.
inline Alignment align_shapes(std::span<const Shape> shapes, int max_iterations = 100,
                              double tolerance = 1e-10) {
  if (shapes.size() < 2) throw InsufficientData("align_shapes needs at least 2 shapes");
  for (const auto& s : shapes) {
    require_same_size(shapes.front(), s);
    if (!(s.rms_radius() > 0.0)) throw DegenerateShape("align_shapes: a shape has all points coincident");
  }

  const std::size_t dim = shapes.front().dim();
  Alignment result;
  Shape mean = normalize_shape(shapes.front());
  result.transforms.resize(shapes.size());
  result.aligned.resize(shapes.size());

  for (int it = 0; it < max_iterations; ++it) {
    std::vector<double> acc(dim, 0.0);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      result.transforms[k] = similarity_fit(shapes[k], mean);
      result.aligned[k] = result.transforms[k].apply(shapes[k]);
      const auto c = result.aligned[k].coords();
      for (std::size_t d = 0; d < dim; ++d) acc[d] += c[d];
    }
    for (auto& v : acc) v /= static_cast<double>(shapes.size());
    Shape next = normalize_shape(Shape(std::move(acc)));

    double moved = 0.0;
    for (std::size_t d = 0; d < dim; ++d) moved = std::max(moved, std::abs(next.coords()[d] - mean.coords()[d]));
    mean = std::move(next);
    result.iterations = it + 1;
    if (moved < tolerance) break;
  }

  // Final pass so transforms and aligned shapes refer to the returned mean.
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    result.transforms[k] = similarity_fit(shapes[k], mean);
    result.aligned[k] = result.transforms[k].apply(shapes[k]);
  }
  result.mean = std::move(mean);
  return result;
}

/// Sum of squared point distances between two shapes.
inline double squared_distance(const Shape& a, const Shape& b) {
  require_same_size(a, b);
  double s = 0.0;
  for (std::size_t d = 0; d < a.dim(); ++d) {
    const double diff = a.coords()[d] - b.coords()[d];
    s += diff * diff;
  }
  return s;
}

}  // namespace asmkit
