#pragma once

#include <string>
#include <variant>
#include <vector>

#include "hiertraj/geometry.hpp"

namespace hiertraj {

inline constexpr int kMaxWaypoints = 20;

enum class GripperAction { OpenGripper, CloseGripper, Grasp };

std::string_view to_string(GripperAction a);

// A waypoint in workspace-normalized coordinates, each component in [0, 1].
struct Waypoint {
  Vec3 position = Vec3::Zero();
  bool operator==(const Waypoint& o) const { return position == o.position; }
};

using PlanStep = std::variant<Waypoint, GripperAction>;

struct TrajectoryPlan {
  std::vector<PlanStep> steps;

  size_t waypoint_count() const;
  // Segments separated by gripper tokens.
  int stage_count() const;
  bool operator==(const TrajectoryPlan&) const = default;
};

inline bool is_closing(GripperAction a) {
  return a == GripperAction::CloseGripper || a == GripperAction::Grasp;
}

enum class PlanViolationKind { Empty, FirstNotWaypoint, Budget, Range, TokenAlternation };

struct PlanViolation {
  PlanViolationKind kind;
  std::string detail;
};

// Reports every violation; an empty result means the plan is valid.
std::vector<PlanViolation> validate_plan(const TrajectoryPlan& plan);

Vec3 normalize_point(const Point3D& p, const Aabb3& workspace);
Point3D denormalize_point(const Vec3& n, const Aabb3& workspace);

Aabb3 default_workspace();

}  // namespace hiertraj
