#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "hiertraj/hash.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

namespace {

struct NamedColor {
  std::string_view word;
  Rgb rgb;
};

constexpr std::array<NamedColor, 10> kPalette{{
    {"red", {0.85, 0.12, 0.10}},
    {"green", {0.15, 0.70, 0.20}},
    {"blue", {0.12, 0.25, 0.85}},
    {"yellow", {0.92, 0.82, 0.15}},
    {"orange", {0.95, 0.55, 0.10}},
    {"purple", {0.55, 0.20, 0.70}},
    {"brown", {0.50, 0.33, 0.18}},
    {"white", {0.95, 0.95, 0.95}},
    {"black", {0.08, 0.08, 0.08}},
    {"gray", {0.50, 0.50, 0.50}},
}};

// Pixel rectangle covering the projection of a world box; empty when any
// corner lies behind the camera.
bool screen_rect(const Aabb3& box, const CameraModel& cam, int& r0, int& r1, int& c0, int& c1) {
  double rmin = 1e300, rmax = -1e300, cmin = 1e300, cmax = -1e300;
  for (int i = 0; i < 8; ++i) {
    const Point3D corner((i & 1) ? box.max.x() : box.min.x(), (i & 2) ? box.max.y() : box.min.y(),
                         (i & 4) ? box.max.z() : box.min.z());
    const auto px = project_point(corner, cam);
    if (!px) return false;
    rmin = std::min(rmin, (*px)[0]);
    rmax = std::max(rmax, (*px)[0]);
    cmin = std::min(cmin, (*px)[1]);
    cmax = std::max(cmax, (*px)[1]);
  }
  r0 = std::max(0, static_cast<int>(std::floor(rmin)) - 1);
  r1 = std::min(cam.height - 1, static_cast<int>(std::ceil(rmax)) + 1);
  c0 = std::max(0, static_cast<int>(std::floor(cmin)) - 1);
  c1 = std::min(cam.width - 1, static_cast<int>(std::ceil(cmax)) + 1);
  return r0 <= r1 && c0 <= c1;
}

}  // namespace

Rgb label_color(std::string_view label) {
  std::string lower(label);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& nc : kPalette) {
    size_t pos = lower.find(nc.word);
    while (pos != std::string::npos) {
      const bool start = pos == 0 || !std::isalpha(static_cast<unsigned char>(lower[pos - 1]));
      const size_t end = pos + nc.word.size();
      const bool stop = end == lower.size() || !std::isalpha(static_cast<unsigned char>(lower[end]));
      if (start && stop) return nc.rgb;
      pos = lower.find(nc.word, pos + 1);
    }
  }
  const double g = 0.3 + 0.4 * static_cast<double>(fnv1a64(lower) % 1000) / 999.0;
  return Rgb{g, g, g};
}

RenderOutput render_scene(const Scene& scene, const CameraModel& cam) {
  cam.validate();
  RenderOutput out;
  out.depth = DepthImage(cam.width, cam.height);
  out.object_index.assign(static_cast<size_t>(cam.pixel_count()), -1);
  out.color.width = cam.width;
  out.color.height = cam.height;
  out.color.pixels.assign(static_cast<size_t>(cam.pixel_count()), Rgb{});

  std::vector<double> best(static_cast<size_t>(cam.pixel_count()), std::numeric_limits<double>::infinity());
  const Point3D origin = cam.extrinsic.position;
  for (size_t k = 0; k < scene.objects.size(); ++k) {
    const SceneObject& o = scene.objects[k];
    int r0, r1, c0, c1;
    if (!screen_rect(o.bounds(), cam, r0, r1, c0, c1)) {
      r0 = 0;
      r1 = cam.height - 1;
      c0 = 0;
      c1 = cam.width - 1;
    }
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const auto t = ray_hit(o.shape, o.pose, origin, cam.ray_direction(r, c));
        if (!t) continue;
        const size_t idx = static_cast<size_t>(r) * cam.width + c;
        if (*t < best[idx]) {
          best[idx] = *t;
          out.object_index[idx] = static_cast<int>(k);
        }
      }
    }
  }
  std::vector<Rgb> colors;
  colors.reserve(scene.objects.size());
  for (const auto& o : scene.objects) colors.push_back(label_color(o.label));
  for (size_t i = 0; i < best.size(); ++i) {
    if (out.object_index[i] < 0) continue;
    out.depth.depth[i] = static_cast<float>(best[i]);
    out.color.pixels[i] = colors[static_cast<size_t>(out.object_index[i])];
  }
  return out;
}

DepthImage render_depth(const Scene& scene, const CameraModel& cam) { return render_scene(scene, cam).depth; }

}  // namespace hiertraj
