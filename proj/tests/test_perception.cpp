#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hiertraj/error.hpp"
#include "hiertraj/perception.hpp"
#include "support.hpp"

using namespace hiertraj;
using hiertraj::test::table_box;

namespace {

size_t diff_count(const SegMask& a, const SegMask& b) {
  size_t n = 0;
  for (size_t i = 0; i < a.bits.size(); ++i) n += a.bits[i] != b.bits[i];
  return n;
}

Scene one_box(double half = 0.03) {
  Scene s;
  s.objects.push_back(table_box("block", 0.05, -0.04, Vec3(half, half, half), 0.0, Role::Target));
  return s;
}

}  // namespace

TEST_CASE("zero error backend returns the rendered mask") {
  const Scene s = one_box();
  auto b = synthetic_backend(s, s.camera, 0.0, 3);
  const SegMask truth = b->reference("block");
  CHECK(truth.count() > 100);
  CHECK(b->segment("block", {}) == truth);
  const RefineResult r = refine_segmentation(*b, "block");
  CHECK(r.iterations == 1);
  CHECK(r.mask == truth);
}

TEST_CASE("negative feedback halves the error set") {
  const Scene s = one_box();
  auto b = synthetic_backend(s, s.camera, 0.5, 9);
  const SegMask truth = b->reference("block");
  std::vector<FeedbackPoint> fb;
  size_t prev = diff_count(b->segment("block", fb), truth);
  CHECK(prev == static_cast<size_t>(std::floor(0.5 * truth.count())));
  while (prev > 0) {
    // Far corner, so only the halving acts.
    fb.push_back({PixelCoord{0, 0}, Polarity::Negative});
    const size_t cur = diff_count(b->segment("block", fb), truth);
    CHECK(cur == prev / 2);
    CHECK(cur < prev);
    prev = cur;
  }
  fb.push_back({PixelCoord{10, 10}, Polarity::Positive});
  CHECK(diff_count(b->segment("block", fb), truth) == 0);
}

TEST_CASE("backend is deterministic per seed") {
  const Scene s = one_box();
  auto a = synthetic_backend(s, s.camera, 0.3, 4);
  auto b = synthetic_backend(s, s.camera, 0.3, 4);
  CHECK(a->segment("block", {}) == b->segment("block", {}));
}

TEST_CASE("refinement converges on a small object") {
  const Scene s = one_box(0.015);
  auto b = synthetic_backend(s, s.camera, 0.3, 21);
  const size_t n = b->reference("block").count();
  CHECK(n >= 49);
  CHECK(n <= 100);
  const RefineResult r = refine_segmentation(*b, "block", 5);
  CHECK(r.iterations <= 5);
  CHECK(r.error_counts.back() == 0);
  for (size_t i = 1; i < r.error_counts.size(); ++i) CHECK(r.error_counts[i] <= r.error_counts[i - 1]);
}

TEST_CASE("single iteration keeps residual error") {
  const Scene s = one_box();
  auto b = synthetic_backend(s, s.camera, 0.3, 2);
  const RefineResult r = refine_segmentation(*b, "block", 1);
  CHECK(r.iterations == 1);
  CHECK(r.error_counts.front() > 0);
  CHECK(r.mask != b->reference("block"));
}

TEST_CASE("sampling a rectangle gives centroid and major extremes") {
  SegMask m(32, 32);
  for (int r = 5; r <= 6; ++r)
    for (int c = 10; c <= 19; ++c) m.set(r, c, true);
  const auto pts = sample_affordance_points(m, 3);
  REQUIRE(pts.size() == 3);
  CameraModel grid;
  grid.width = grid.height = 32;
  // Mean (5.5, 14.5) rounds half up to (6, 15).
  CHECK(norm_to_pixel(pts[0], grid) == PixelCoord{6, 15});
  CHECK(norm_to_pixel(pts[1], grid).col == 19);
  CHECK(norm_to_pixel(pts[2], grid).col == 10);
}

TEST_CASE("sampling edge cases") {
  SegMask one(8, 8);
  one.set(3, 3, true);
  CHECK_THROWS_AS(sample_affordance_points(one, 3), Error);
  try {
    sample_affordance_points(one, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientSpread);
  }
  CHECK(sample_affordance_points(one, 1, true).size() == 1);

  SegMask empty(8, 8);
  try {
    sample_affordance_points(empty, 3);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyMask);
  }

  SegMask full(64, 64);
  std::fill(full.bits.begin(), full.bits.end(), 1);
  const auto pts = sample_affordance_points(full, 3);
  CHECK(std::abs(pts[0].u - 0.5) <= 1.0 / 63);
  CHECK(std::abs(pts[0].v - 0.5) <= 1.0 / 63);
}

TEST_CASE("noise free affordances fall inside the object") {
  Scene s = one_box();
  s.objects.push_back(table_box("mat", -0.2, 0.1, Vec3(0.06, 0.06, 0.005)));
  PerceptionConfig cfg;
  const AffordanceSet a = detect_affordances(s, s.camera, {"block", "mat"}, cfg);
  auto b = synthetic_backend(s, s.camera, 0.0, 0);
  for (const auto& e : a.entries) {
    CHECK(e.points.size() == 3);
    const SegMask truth = b->reference(e.label);
    for (const auto& p : e.points) {
      const PixelCoord px = norm_to_pixel(p, s.camera);
      CHECK(truth.at(px.row, px.col));
    }
  }
  cfg.points_per_object = 1;
  const AffordanceSet one = detect_affordances(s, s.camera, {"block"}, cfg);
  CHECK(one.entries[0].points.size() == 1);
}

TEST_CASE("missing object is not visible") {
  const Scene s = one_box();
  try {
    detect_affordances(s, s.camera, {"ghost"}, {});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ObjectNotVisible);
  }
}

TEST_CASE("pixel noise has the expected magnitude") {
  const Scene s = one_box();
  PerceptionConfig clean;
  const auto base = detect_affordances(s, s.camera, {"block"}, clean).entries[0].points;
  const double sigma = 4.0;
  double sum = 0.0;
  int n = 0;
  for (int t = 0; t < 500; ++t) {
    PerceptionConfig cfg;
    cfg.noise_px = sigma;
    cfg.seed = static_cast<std::uint64_t>(t);
    const auto pts = detect_affordances(s, s.camera, {"block"}, cfg).entries[0].points;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double du = (pts[i].u - base[i].u) * (s.camera.width - 1);
      const double dv = (pts[i].v - base[i].v) * (s.camera.height - 1);
      sum += std::hypot(du, dv);
      ++n;
    }
  }
  const double mean = sum / n;
  // Rayleigh mean is sigma * sqrt(pi / 2).
  CHECK(mean >= 0.5 * sigma);
  CHECK(mean <= 2.0 * sigma);
  CHECK(mean == doctest::Approx(sigma * std::sqrt(M_PI / 2)).epsilon(0.1));
}

TEST_CASE("pgm export") {
  SegMask m(3, 2);
  m.set(1, 2, true);
  std::ostringstream out;
  write_pgm(out, m);
  const std::string s = out.str();
  CHECK(s.rfind("P5\n3 2\n255\n", 0) == 0);
  CHECK(static_cast<unsigned char>(s.back()) == 255);
  CHECK(s.size() == std::string("P5\n3 2\n255\n").size() + 6);
}
