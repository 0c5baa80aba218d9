#include <cmath>
#include <numbers>
#include <random>

#include "hiertraj/error.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

namespace {

constexpr double kMinGap = 0.06;
constexpr int kMaxAttempts = 1000;
constexpr double kJengaSpacing = 0.0305;
constexpr double kJengaProtrusion = 0.05;

struct Region {
  double x0, x1, y0, y1;
};

struct Rect {
  double x0, x1, y0, y1;
};

Eigen::Quaterniond yaw_quat(double yaw) { return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

SceneObject make(std::string id, std::string label, Shape shape, Role role, bool graspable) {
  SceneObject o;
  o.id = std::move(id);
  o.label = std::move(label);
  o.shape = shape;
  o.role = role;
  o.graspable = graspable;
  return o;
}

// A rigid group of objects given in a local frame; placed as one unit.
struct Group {
  std::vector<SceneObject> parts;  // poses relative to the group origin
};

class Spawner {
 public:
  explicit Spawner(std::uint64_t seed, TaskName task)
      : rng_(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(task) + 1) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  void place(const Group& g, const Region& region, double yaw) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const Point3D c(uniform(region.x0, region.x1), uniform(region.y0, region.y1), 0.0);
      const Pose6D frame(c, yaw_quat(yaw));
      std::vector<SceneObject> placed;
      Rect r{1e9, -1e9, 1e9, -1e9};
      for (const auto& part : g.parts) {
        SceneObject o = part;
        o.pose = frame.compose(part.pose);
        o.initial_pose = o.pose;
        const Aabb3 b = o.bounds();
        r = Rect{std::min(r.x0, b.min.x()), std::max(r.x1, b.max.x()), std::min(r.y0, b.min.y()),
                 std::max(r.y1, b.max.y())};
        placed.push_back(std::move(o));
      }
      if (!fits(r)) continue;
      rects_.push_back(r);
      for (auto& o : placed) scene_.objects.push_back(std::move(o));
      return;
    }
    throw Error(ErrorCode::PlacementExhausted,
                "could not place '" + g.parts.front().id + "' after " + std::to_string(kMaxAttempts) + " attempts");
  }

  void place(const SceneObject& o, const Region& region, double yaw) { place(Group{{o}}, region, yaw); }

  Scene& scene() { return scene_; }

 private:
  bool fits(const Rect& r) const {
    const double lim = 0.45;
    if (r.x0 < -lim || r.x1 > lim || r.y0 < -lim || r.y1 > lim) return false;
    for (const auto& o : rects_) {
      const double dx = std::max({0.0, o.x0 - r.x1, r.x0 - o.x1});
      const double dy = std::max({0.0, o.y0 - r.y1, r.y0 - o.y1});
      if (std::hypot(dx, dy) < kMinGap) return false;
    }
    return true;
  }

  std::mt19937_64 rng_;
  Scene scene_;
  std::vector<Rect> rects_;
};

SceneObject at(SceneObject o, const Point3D& p, double yaw = 0.0) {
  o.pose = Pose6D(p, yaw_quat(yaw));
  return o;
}

Group walls(const std::string& prefix, const std::string& label, double inner, double thick, double height,
            Role role) {
  const double h = 0.5 * height;
  const double t = 0.5 * thick;
  Group g;
  g.parts.push_back(at(make(prefix + "_n", label, Shape::box(inner + thick, t, h), role, false),
                       Point3D(0, inner + t, h)));
  g.parts.push_back(at(make(prefix + "_s", label, Shape::box(inner + thick, t, h), role, false),
                       Point3D(0, -inner - t, h)));
  g.parts.push_back(at(make(prefix + "_e", label, Shape::box(t, inner, h), role, false),
                       Point3D(inner + t, 0, h)));
  g.parts.push_back(at(make(prefix + "_w", label, Shape::box(t, inner, h), role, false),
                       Point3D(-inner - t, 0, h)));
  return g;
}

}  // namespace

std::pair<Scene, TaskSpec> spawn_scene(TaskName task, std::uint64_t seed) {
  Spawner sp(seed, task);
  TaskSpec spec;
  spec.name = task;
  spec.instruction = default_instruction(task);
  spec.params = default_task_params(task);
  const double quarter = 0.5 * std::numbers::pi;

  switch (task) {
    case TaskName::PutBlock: {
      spec.target_id = "green_block";
      spec.goal_id = "red_mat";
      sp.place(at(make("green_block", "green block", Shape::box(0.015, 0.015, 0.015), Role::Target, true),
                  Point3D(0, 0, 0.015)),
               {-0.25, -0.05, -0.2, 0.2}, sp.uniform(0.0, quarter));
      sp.place(at(make("red_mat", "red mat", Shape::box(0.06, 0.06, 0.005), Role::Surface, false),
                  Point3D(0, 0, 0.005)),
               {0.08, 0.25, -0.2, 0.2}, sp.uniform(0.0, quarter));
      const double hz = sp.uniform(0.04, 0.10);
      sp.place(at(make("obstacle", "gray box", Shape::box(0.03, 0.03, hz), Role::Obstacle, false),
                  Point3D(0, 0, hz)),
               {-0.3, 0.3, -0.3, 0.3}, sp.uniform(0.0, quarter));
      break;
    }
    case TaskName::PickupCup: {
      spec.target_id = "red_cup";
      sp.place(at(make("red_cup", "red cup", Shape::cylinder(0.02, 0.04), Role::Target, true),
                  Point3D(0, 0, 0.04)),
               {-0.25, 0.25, -0.25, 0.25}, 0.0);
      sp.place(at(make("blue_block", "blue block", Shape::box(0.02, 0.02, 0.03), Role::Obstacle, true),
                  Point3D(0, 0, 0.03)),
               {-0.3, 0.3, -0.3, 0.3}, sp.uniform(0.0, quarter));
      break;
    }
    case TaskName::PlayJenga: {
      spec.target_id = "jenga_target";
      const Shape block = Shape::box(0.045, 0.015, 0.015);
      Group tower;
      int n = 0;
      for (int layer = 0; layer < 3; ++layer) {
        const double z = 0.015 + 0.03 * layer;
        for (int k = -1; k <= 1; ++k) {
          const double off = kJengaSpacing * k;
          if (layer == 0 && k == 0) {
            tower.parts.insert(tower.parts.begin(),
                               at(make("jenga_target", "protruding block", block, Role::Target, true),
                                  Point3D(kJengaProtrusion, 0, z)));
            continue;
          }
          const std::string id = "jenga_" + std::to_string(n++);
          if (layer == 1) {
            tower.parts.push_back(at(make(id, "tower block", block, Role::Obstacle, true), Point3D(off, 0, z), quarter));
          } else {
            tower.parts.push_back(at(make(id, "tower block", block, Role::Obstacle, true), Point3D(0, off, z)));
          }
        }
      }
      const double yaw = quarter * sp.pick(4);
      sp.place(tower, {-0.05, 0.05, -0.05, 0.05}, yaw);
      break;
    }
    case TaskName::TakeUmbrella: {
      spec.target_id = "umbrella";
      Group g = walls("stand_wall", "umbrella stand", 0.03, 0.01, 0.15, Role::Container);
      const double ox = sp.uniform(-0.01, 0.01);
      const double oy = sp.uniform(-0.01, 0.01);
      g.parts.insert(g.parts.begin(),
                     at(make("umbrella", "black umbrella", Shape::cylinder(0.012, 0.12), Role::Target, true),
                        Point3D(ox, oy, 0.12)));
      sp.place(g, {-0.12, 0.12, -0.12, 0.12}, 0.0);
      break;
    }
    case TaskName::PushBlock: {
      spec.target_id = "red_block";
      spec.goal_id = "green_target";
      sp.place(at(make("red_block", "red block", Shape::box(0.02, 0.02, 0.02), Role::Target, true),
                  Point3D(0, 0, 0.02)),
               {-0.2, 0.0, -0.2, 0.2}, sp.uniform(0.0, quarter));
      sp.place(at(make("green_target", "green target", Shape::cylinder(0.05, 0.001), Role::Surface, false),
                  Point3D(0, 0, 0.001)),
               {0.1, 0.25, -0.2, 0.2}, 0.0);
      break;
    }
    case TaskName::SortObject: {
      spec.target_id = "yellow_mustard";
      spec.goal_id = "red_container";
      sp.place(at(make("yellow_mustard", "yellow mustard bottle", Shape::cylinder(0.018, 0.035), Role::Target,
                       true),
                  Point3D(0, 0, 0.035)),
               {-0.25, -0.05, -0.2, 0.2}, 0.0);
      Group g = walls("container_wall", "red container wall", 0.07, 0.01, 0.05, Role::Container);
      g.parts.insert(g.parts.begin(),
                     at(make("red_container", "red container", Shape::box(0.07, 0.07, 0.003), Role::Surface, false),
                        Point3D(0, 0, 0.003)));
      sp.place(g, {0.1, 0.25, -0.2, 0.2}, 0.0);
      break;
    }
  }
  Scene scene = std::move(sp.scene());
  scene.validate();
  return {std::move(scene), std::move(spec)};
}

}  // namespace hiertraj
