#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hiertraj/geometry.hpp"
#include "hiertraj/knowledge.hpp"
#include "hiertraj/perception.hpp"
#include "hiertraj/plan.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

struct Affordance3D {
  std::string label;
  std::vector<Point3D> points;
  std::optional<PrincipalFrame> frame;

  Point3D centroid() const;
  double top() const;
};

// Points landing on sentinel depth are dropped; entries with fewer than 3
// points keep no frame.
std::vector<Affordance3D> lift_affordances(const AffordanceSet& aset, const DepthImage& depth,
                                           const CameraModel& cam);

// Refits every existing frame to the cloud points inside the affordance's
// bounds inflated by `margin`. Entries without a frame keep none.
void refine_frames(std::vector<Affordance3D>& affs, const PointCloud& cloud, double margin);

enum class Skill { PickPlace, PickLift, ExtractAlongAxis, ExtractVertical, PushToTarget };

std::string_view to_string(Skill s);
Skill select_skill(TaskName task);
Skill select_skill(std::string_view task_name);

struct PlannerConfig {
  double pre_grasp_offset = 0.10;
  double transit_clearance = 0.10;
  double retreat_offset = 0.10;
  bool ignore_obstacles = false;
  bool two_d_mode = false;
  // Extraction without a target frame falls back to +x instead of failing.
  bool allow_missing_frame = false;
};

struct PlanMetadata {
  Skill skill = Skill::PickPlace;
  double transit_clearance = 0.10;
  double transit_z = 0.0;
  Point3D grasp_point = Point3D::Zero();
  Vec3 axis = Vec3::UnitZ();  // extraction or push direction
  std::optional<Point3D> goal;
};

struct PlanOutput {
  TrajectoryPlan plan;
  PlanMetadata meta;
};

PlanOutput plan_trajectory(const TaskSpec& task, const std::vector<Affordance3D>& affordances,
                           const PlannerConfig& cfg, const std::vector<KnowledgeItem>& knowledge = {},
                           const Aabb3& workspace = default_workspace());

}  // namespace hiertraj
