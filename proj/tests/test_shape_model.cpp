#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "asmkit/shape_model.hpp"
#include "asmkit/synthetic.hpp"
#include "support.hpp"

using namespace asmkit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_abs_diff(const Shape& a, const Shape& b) {
  double m = 0.0;
  for (std::size_t d = 0; d < a.dim(); ++d) m = std::max(m, std::abs(a.coords()[d] - b.coords()[d]));
  return m;
}

double max_abs(const Shape& a) {
  double m = 0.0;
  for (double v : a.coords()) m = std::max(m, std::abs(v));
  return m;
}

// Sum over coordinates of the sample variance (divisor K-1), computed by hand.
double total_variance(std::span<const Shape> shapes) {
  const std::size_t dim = shapes.front().dim();
  double total = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& s : shapes) mean += s.coords()[d];
    mean /= static_cast<double>(shapes.size());
    double v = 0.0;
    for (const auto& s : shapes) v += (s.coords()[d] - mean) * (s.coords()[d] - mean);
    total += v / static_cast<double>(shapes.size() - 1);
  }
  return total;
}

}  // namespace

TEST_CASE("build_shape_model: K copies of one shape has no retainable component") {
  const Shape s({0, 0, 1, 0, 0, 1});
  const std::vector<Shape> shapes(5, s);
  CHECK_THROWS_AS(build_shape_model(shapes, Retention::components(1)), RetentionUnsatisfiable);
  CHECK_THROWS_AS(build_shape_model(shapes, Retention::fraction(0.9)), RetentionUnsatisfiable);
}

TEST_CASE("build_shape_model: single-direction data recovers the direction") {
  std::mt19937_64 rng(1);
  const auto base = testing_support::random_shape(rng, 8);
  const auto phi = testing_support::random_shape(rng, 8);
  double norm = 0.0;
  for (double v : phi.coords()) norm += v * v;
  norm = std::sqrt(norm);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Shape> shapes;
  for (int k = 0; k < 30; ++k) {
    const double c = normal(rng);
    std::vector<double> x(base.flat());
    for (std::size_t d = 0; d < x.size(); ++d) x[d] += c * phi.coords()[d];
    shapes.emplace_back(x);
  }
  for (double f : {0.5, 0.95, 1.0}) {
    const auto m = build_shape_model(shapes, Retention::fraction(f));
    REQUIRE(m.t() == 1);
    double dot = 0.0;
    for (std::size_t d = 0; d < base.dim(); ++d) dot += m.components(0, static_cast<Eigen::Index>(d)) * phi.coords()[d] / norm;
    CHECK(std::abs(dot) > 1.0 - 1e-9);
  }
}

TEST_CASE("build_shape_model: structural invariants") {
  const auto shapes = testing_support::random_shapes(2, 200, 20);
  const auto m = build_shape_model(shapes, Retention::fraction(1.0));
  CHECK(m.t() == 40);
  CHECK(m.n_points() == 20);
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
    CHECK(m.eigenvalues(i) > 0.0);
    if (i > 0) CHECK(m.eigenvalues(i) <= m.eigenvalues(i - 1));
  }
  // First non-negligible entry of every component is positive.
  for (Eigen::Index i = 0; i < m.components.rows(); ++i) {
    const double cutoff = 1e-12 * m.components.row(i).cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < m.components.cols(); ++j) {
      if (std::abs(m.components(i, j)) > cutoff) {
        CHECK(m.components(i, j) > 0.0);
        break;
      }
    }
  }
  // Mean is the sample mean.
  for (std::size_t d = 0; d < 40; ++d) {
    double mean = 0.0;
    for (const auto& s : shapes) mean += s.coords()[d];
    CHECK_THAT(m.mean(static_cast<Eigen::Index>(d)), WithinAbs(mean / 200.0, 1e-12));
  }
  // Eigenvalues sum to the total sample variance (divisor K-1).
  CHECK_THAT(m.eigenvalues.sum(), WithinRel(total_variance(shapes), 1e-10));
}

TEST_CASE("build_shape_model: t is bounded by K - 1") {
  const auto shapes = testing_support::random_shapes(4, 5, 10);
  CHECK(build_shape_model(shapes, Retention::fraction(1.0)).t() == 4);
  CHECK_THROWS_AS(build_shape_model(shapes, Retention::components(5)), RetentionUnsatisfiable);
  CHECK_THROWS_AS(build_shape_model(std::vector<Shape>{shapes[0]}, Retention::fraction(1.0)), InsufficientData);
  CHECK_THROWS_AS(build_shape_model(shapes, Retention::fraction(0.0)), InvalidConfig);
  CHECK_THROWS_AS(build_shape_model(shapes, Retention::fraction(1.5)), InvalidConfig);
}

TEST_CASE("build_shape_model: variance fraction picks the smallest sufficient t") {
  const auto shapes = testing_support::structured_shapes(9, 100, 12, 4);
  const auto full = build_shape_model(shapes, Retention::fraction(1.0));
  const double total = full.eigenvalues.sum();
  for (double f : {0.3, 0.6, 0.9, 0.99}) {
    const auto m = build_shape_model(shapes, Retention::fraction(f));
    CHECK(full.eigenvalues.head(static_cast<Eigen::Index>(m.t())).sum() >= f * total);
    if (m.t() > 1) CHECK(full.eigenvalues.head(static_cast<Eigen::Index>(m.t() - 1)).sum() < f * total);
    CHECK_THAT(m.retained_fraction(), WithinAbs(full.eigenvalues.head(static_cast<Eigen::Index>(m.t())).sum() / total, 1e-12));
  }
}

TEST_CASE("project / reconstruct") {
  const auto shapes = testing_support::random_shapes(3, 200, 20);
  const auto m = build_shape_model(shapes, Retention::fraction(1.0));
  const auto mean = m.mean_shape();

  SECTION("project(mean) = 0") {
    const auto b = project(m, mean);
    CHECK(b.b.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("project(mean + 2 p1) = (2, 0, ...)") {
    std::vector<double> x(mean.flat());
    for (std::size_t d = 0; d < x.size(); ++d) x[d] += 2.0 * m.components(0, static_cast<Eigen::Index>(d));
    const auto b = project(m, Shape(x));
    CHECK_THAT(b.b(0), WithinAbs(2.0, 1e-12));
    CHECK(b.b.tail(b.b.size() - 1).cwiseAbs().maxCoeff() < 1e-12);
  }
  SECTION("reconstruct(0) is the mean exactly") {
    CHECK(reconstruct(m, ShapeParams{Eigen::VectorXd::Zero(40)}) == mean);
  }
  SECTION("reconstruct(3 sqrt(l1) e1) is mean + 3 sqrt(l1) p1 coordinatewise") {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(40);
    b(0) = 3.0 * std::sqrt(m.eigenvalues(0));
    const auto r = reconstruct(m, ShapeParams{b});
    for (std::size_t d = 0; d < 40; ++d) {
      CHECK_THAT(r.coords()[d], WithinAbs(mean.coords()[d] + b(0) * m.components(0, static_cast<Eigen::Index>(d)), 1e-12));
    }
  }
  SECTION("full-rank round trip on every training shape") {
    for (const auto& s : shapes) CHECK(max_abs_diff(reconstruct(m, project(m, s)), s) < 1e-8 * (1.0 + max_abs(s)));
  }
  SECTION("size errors") {
    CHECK_THROWS_AS(project(m, Shape({0, 0, 1, 0, 0, 1})), ShapeMismatch);
    CHECK_THROWS_AS(reconstruct(m, ShapeParams{Eigen::VectorXd::Zero(3)}), ParamMismatch);
    CHECK_THROWS_AS(clamp_params(m, ShapeParams{Eigen::VectorXd::Zero(3)}), ParamMismatch);
  }
}

TEST_CASE("truncation is monotone and ends at zero error") {
  const auto shapes = testing_support::structured_shapes(4, 80, 10, 5);
  const auto full = build_shape_model(shapes, Retention::fraction(1.0));
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t <= full.t(); ++t) {
    const auto m = build_shape_model(shapes, Retention::components(t));
    double err = 0.0;
    for (const auto& s : shapes) err += std::sqrt(squared_distance(reconstruct(m, project(m, s)), s));
    err /= static_cast<double>(shapes.size());
    CHECK(err <= previous + 1e-12);
    previous = err;
  }
  CHECK(previous <= 1e-8);
}

TEST_CASE("clamp_params") {
  const auto shapes = testing_support::random_shapes(5, 50, 6);
  const auto m = build_shape_model(shapes, Retention::fraction(1.0));
  const auto t = static_cast<Eigen::Index>(m.t());
  const Eigen::VectorXd sq = m.eigenvalues.cwiseSqrt();

  CHECK(clamp_params(m, ShapeParams{Eigen::VectorXd::Zero(t)}).b == Eigen::VectorXd::Zero(t));
  const auto hi = clamp_params(m, ShapeParams{5.0 * sq}).b;
  const auto lo = clamp_params(m, ShapeParams{-10.0 * sq}).b;
  for (Eigen::Index i = 0; i < t; ++i) {
    CHECK(hi(i) == 3.0 * std::sqrt(m.eigenvalues(i)));
    CHECK(lo(i) == -3.0 * std::sqrt(m.eigenvalues(i)));
  }

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 2000; ++k) {
    Eigen::VectorXd b(t);
    for (Eigen::Index i = 0; i < t; ++i) b(i) = u(rng) * sq(i);
    const auto c = clamp_params(m, ShapeParams{b}).b;
    for (Eigen::Index i = 0; i < t; ++i) {
      const double limit = 3.0 * std::sqrt(m.eigenvalues(i));
      CHECK(std::abs(c(i)) <= limit);
      if (std::abs(b(i)) <= limit) CHECK(c(i) == b(i));
    }
  }
}

TEST_CASE("asm_transform") {
  SECTION("mean is a fixed point (raw)") {
    const auto shapes = testing_support::structured_shapes(8, 60, 10);
    const auto m = build_shape_model(shapes, Retention::fraction(0.9));
    CHECK(max_abs_diff(asm_transform(m, m.mean_shape()), m.mean_shape()) < 1e-12);
  }
  SECTION("full-rank model leaves in-distribution shapes unchanged") {
    const auto shapes = testing_support::random_shapes(9, 200, 20);
    const auto m = build_shape_model(shapes, Retention::fraction(1.0));
    std::size_t checked = 0;
    for (const auto& s : shapes) {
      const auto b = project(m, s);
      const auto c = clamp_params(m, b);
      if (c.b != b.b) continue;  // only unclamped shapes
      CHECK(max_abs_diff(asm_transform(m, s), s) < 1e-8);
      ++checked;
    }
    CHECK(checked > 100);
  }
  SECTION("variance reduction at 90% retention") {
    SyntheticConfig cfg;
    cfg.train_count = 500;
    cfg.test_count = 0;
    cfg.seed = 21;
    const auto data = generate_synthetic(cfg);
    std::vector<Shape> gt;
    for (const auto& r : data.records) gt.push_back(r.gt_shape);
    const auto m = build_shape_model(gt, Retention::fraction(0.9));
    std::vector<Shape> smoothed;
    for (const auto& s : gt) smoothed.push_back(asm_transform(m, s));
    CHECK(total_variance(smoothed) <= total_variance(gt));

    // Aligned mode: the reduction holds in the model frame, where the operator is a
    // clamped orthogonal projection. The per-shape inverse transform can undo it.
    const auto ma = build_shape_model(gt, Retention::fraction(0.9), FrameMode::aligned);
    std::vector<Shape> in_frame, smoothed_frame;
    for (const auto& s : gt) {
      in_frame.push_back(similarity_fit(s, ma.mean_shape()).apply(s));
      smoothed_frame.push_back(reconstruct(ma, clamp_params(ma, project(ma, in_frame.back()))));
    }
    CHECK(total_variance(smoothed_frame) <= total_variance(in_frame));
  }
  SECTION("aligned mode preserves the input frame") {
    const auto shapes = testing_support::structured_shapes(10, 100, 12);
    const auto m = build_shape_model(shapes, Retention::fraction(0.99), FrameMode::aligned);
    const auto full = build_shape_model(shapes, Retention::fraction(1.0), FrameMode::aligned);
    std::size_t in_distribution = 0;
    for (std::size_t k = 0; k < 40; ++k) {
      const auto& s = shapes[k];
      const auto out = asm_transform(m, s);
      CHECK_THAT(out.centroid().x, WithinAbs(s.centroid().x, 1e-6 * (1 + std::abs(s.centroid().x))));
      CHECK_THAT(out.centroid().y, WithinAbs(s.centroid().y, 1e-6 * (1 + std::abs(s.centroid().y))));
      // Scale is kept exactly only when nothing is removed: in span and unclamped.
      const auto b = project(full, similarity_fit(s, full.mean_shape()).apply(s));
      if (clamp_params(full, b).b != b.b) continue;
      ++in_distribution;
      CHECK_THAT(asm_transform(full, s).rms_radius(), WithinRel(s.rms_radius(), 1e-6));
    }
    CHECK(in_distribution > 10);
    CHECK_THROWS_AS(asm_transform(m, Shape(std::vector<double>(24, 1.0))), DegenerateShape);
  }
  SECTION("aligned full-rank model maps in-span shapes to themselves") {
    const auto shapes = testing_support::structured_shapes(12, 100, 8);
    const auto m = build_shape_model(shapes, Retention::fraction(1.0), FrameMode::aligned);
    const SimilarityTransform t{1.7, 0.4, 3.0, -2.0};
    for (std::size_t k = 0; k < 10; ++k) {
      const auto s = t.apply(shapes[k]);
      const auto b = project(m, similarity_fit(s, m.mean_shape()).apply(s));
      if (clamp_params(m, b).b != b.b) continue;
      CHECK(max_abs_diff(asm_transform(m, s), s) < 1e-8);
    }
  }
}

TEST_CASE("ASMMODEL serialization") {
  SECTION("minimal model round-trips byte-identically") {
    const std::vector<Shape> shapes{Shape({0, 0, 1, 0, 0, 1}), Shape({0, 0, 2, 0, 0, 2})};
    const auto m = build_shape_model(shapes, Retention::fraction(1.0));
    REQUIRE(m.t() == 1);
    const auto text = serialize_model(m);
    const auto back = deserialize_model(text);
    CHECK(serialize_model(back) == text);
    CHECK(back.mean == m.mean);
    CHECK(back.eigenvalues == m.eigenvalues);
    CHECK(back.components == m.components);
    CHECK(back.mode == m.mode);
  }
  SECTION("random models round-trip exactly") {
    for (auto mode : {FrameMode::raw, FrameMode::aligned}) {
      const auto shapes = testing_support::structured_shapes(13, 40, 9);
      const auto m = build_shape_model(shapes, Retention::fraction(0.97), mode);
      const auto back = deserialize_model(serialize_model(m, "comment line\nsecond"));
      CHECK(back.mean == m.mean);
      CHECK(back.eigenvalues == m.eigenvalues);
      CHECK(back.components == m.components);
      CHECK(back.mode == mode);
    }
  }
  SECTION("missing eigenvector line is named") {
    const auto shapes = testing_support::random_shapes(14, 30, 5);
    const auto m = build_shape_model(shapes, Retention::components(5));
    auto text = serialize_model(m);
    text = text.substr(0, text.rfind("ev 5"));
    try {
      deserialize_model(text);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("ev 5") != std::string::npos);
    }
  }
  SECTION("NaN eigenvalue rejected") {
    const std::string text =
        "ASMMODEL v1\nmode raw\nn_points 3\nn_components 1\nmean 0 0 0 0 0 0\neigenvalues NaN\nev 1 1 0 0 0 0 0\n";
    try {
      deserialize_model(text);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.line() == 6);
    }
  }
  SECTION("other malformed inputs") {
    const std::string good =
        "ASMMODEL v1\nmode raw\nn_points 3\nn_components 1\nmean 0 0 0 0 0 0\neigenvalues 2\nev 1 1 0 0 0 0 0\n";
    CHECK_NOTHROW(deserialize_model(good));
    CHECK_NOTHROW(deserialize_model("ASMMODEL v1\n# note\n\nmode raw\nn_points 3\nn_components 1\nmean 0 0 0 0 0 0\n"
                                    "eigenvalues 2\nev 1 1 0 0 0 0 0\n"));
    CHECK_THROWS_AS(deserialize_model("ASMMODEL v2\n"), FormatError);
    CHECK_THROWS_AS(deserialize_model(""), FormatError);
    std::string bad = good;
    bad.replace(bad.find("mode raw"), 8, "mode odd");
    CHECK_THROWS_AS(deserialize_model(bad), FormatError);
    bad = good;
    bad.replace(bad.find("eigenvalues 2"), 13, "eigenvalues -2");
    CHECK_THROWS_AS(deserialize_model(bad), FormatError);
    bad = good;
    bad.replace(bad.find("ev 1 1 0"), 8, "ev 1 2 0");
    CHECK_THROWS_AS(deserialize_model(bad), FormatError);  // not unit length
    CHECK_THROWS_AS(deserialize_model(good + "extra\n"), FormatError);
  }
}
