#include "hiertraj/plan.hpp"

namespace hiertraj {

std::string_view to_string(GripperAction a) {
  switch (a) {
    case GripperAction::OpenGripper: return "Open Gripper";
    case GripperAction::CloseGripper: return "Close Gripper";
    case GripperAction::Grasp: return "Grasp";
  }
  return "";
}

size_t TrajectoryPlan::waypoint_count() const {
  size_t n = 0;
  for (const auto& s : steps) n += std::holds_alternative<Waypoint>(s) ? 1 : 0;
  return n;
}

int TrajectoryPlan::stage_count() const {
  if (steps.empty()) return 0;
  int n = 1;
  for (const auto& s : steps) n += std::holds_alternative<GripperAction>(s) ? 1 : 0;
  return n;
}

std::vector<PlanViolation> validate_plan(const TrajectoryPlan& plan) {
  std::vector<PlanViolation> out;
  if (plan.steps.empty()) {
    out.push_back({PlanViolationKind::Empty, "empty"});
    return out;
  }
  if (!std::holds_alternative<Waypoint>(plan.steps.front())) {
    out.push_back({PlanViolationKind::FirstNotWaypoint, "first step must be a waypoint"});
  }
  const size_t n = plan.waypoint_count();
  if (n > static_cast<size_t>(kMaxWaypoints)) {
    out.push_back({PlanViolationKind::Budget,
                   "budget: " + std::to_string(n) + " waypoints exceed " + std::to_string(kMaxWaypoints)});
  }
  bool closed = false;
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    if (const auto* w = std::get_if<Waypoint>(&plan.steps[i])) {
      for (int k = 0; k < 3; ++k) {
        const double c = w->position[k];
        if (!(c >= 0.0 && c <= 1.0)) {
          out.push_back({PlanViolationKind::Range,
                         "range: step " + std::to_string(i) + " component " + std::to_string(c)});
          break;
        }
      }
      continue;
    }
    const auto a = std::get<GripperAction>(plan.steps[i]);
    const bool closing = is_closing(a);
    if (closing == closed) {
      out.push_back({PlanViolationKind::TokenAlternation,
                     "token alternation: " + std::string(to_string(a)) + " at step " + std::to_string(i)});
    }
    closed = closing;
  }
  return out;
}

Vec3 normalize_point(const Point3D& p, const Aabb3& workspace) {
  return ((p - workspace.min).array() / workspace.size().array()).matrix();
}

Point3D denormalize_point(const Vec3& n, const Aabb3& workspace) {
  return workspace.min + (n.array() * workspace.size().array()).matrix();
}

Aabb3 default_workspace() { return Aabb3(Point3D(-0.5, -0.5, 0.0), Point3D(0.5, 0.5, 0.8)); }

}  // namespace hiertraj
