#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hiertraj/geometry.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

struct SegMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  SegMask() = default;
  SegMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

  bool at(int row, int col) const { return bits[static_cast<size_t>(row) * width + col] != 0; }
  void set(int row, int col, bool on) { bits[static_cast<size_t>(row) * width + col] = on ? 1 : 0; }
  size_t count() const;
  bool operator==(const SegMask&) const = default;
};

enum class Polarity { Positive, Negative };

struct FeedbackPoint {
  PixelCoord pixel;
  Polarity polarity = Polarity::Negative;
};

struct AffordanceEntry {
  std::string label;
  std::vector<NormPoint2D> points;
  bool operator==(const AffordanceEntry&) const = default;
};

struct AffordanceSet {
  std::vector<AffordanceEntry> entries;

  const AffordanceEntry* find(std::string_view label) const;
  // Unique labels, coordinates in [0,1], at least `min_points` per entry.
  void validate(size_t min_points = 3) const;
  bool operator==(const AffordanceSet&) const = default;
};

// Segmentation stand-in. `segment` sees every feedback point given so far for
// the label; `reference` is the mask the refinement loop judges against.
class SegBackend {
 public:
  virtual ~SegBackend() = default;
  virtual SegMask segment(const std::string& label, std::span<const FeedbackPoint> feedback) = 0;
  virtual SegMask reference(const std::string& label) const = 0;
};

// Ground truth from the renderer XOR a seeded error set of
// floor(error_rate * |mask|) pixels. A label resolves to an object id first,
// then to every object carrying that label.
std::unique_ptr<SegBackend> synthetic_backend(const Scene& scene, const CameraModel& cam, double error_rate,
                                              std::uint64_t seed);
// Same, reusing a render of `scene` from `cam`.
std::unique_ptr<SegBackend> synthetic_backend(const Scene& scene, const CameraModel& cam, const RenderOutput& render,
                                              double error_rate, std::uint64_t seed);

struct RefineResult {
  SegMask mask;
  int iterations = 0;
  std::vector<size_t> error_counts;  // one per iteration
};

RefineResult refine_segmentation(SegBackend& backend, const std::string& label, int n_max = 5);

// Centroid, then extremes along +major, -major, +minor, -minor. With
// `allow_sparse` fewer than 3 unique points are accepted.
std::vector<NormPoint2D> sample_affordance_points(const SegMask& mask, int k, bool allow_sparse = false);

struct PerceptionConfig {
  int points_per_object = 3;
  double noise_px = 0.0;
  int n_max = 5;
  double error_rate = 0.0;
  std::uint64_t seed = 0;
};

AffordanceSet detect_affordances(const Scene& scene, const CameraModel& cam, const std::vector<std::string>& labels,
                                 const PerceptionConfig& cfg);
AffordanceSet detect_affordances(SegBackend& backend, const std::vector<std::string>& labels,
                                 const PerceptionConfig& cfg);

// Object ids with at least `min_pixels` rendered pixels, in scene order.
std::vector<std::string> visible_objects(const Scene& scene, const CameraModel& cam, size_t min_pixels = 3);
std::vector<std::string> visible_objects(const Scene& scene, const RenderOutput& render, size_t min_pixels = 3);

// Binary PGM (P5, maxval 255, object = 255).
void write_pgm(std::ostream& out, const SegMask& mask);

}  // namespace hiertraj
