#pragma once

#include <limits>
#include <vector>

#include "hiertraj/geometry.hpp"
#include "hiertraj/planner.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

inline constexpr double kMaxJawOpening = 0.08;

struct GraspCandidate {
  Pose6D pose;  // y = closing axis, z = approach
  double width = 0.0;
  double score = 0.0;
};

struct HgmConfig {
  double crop_margin = 0.01;
  // Minimum cropped share of scene points, in percent.
  double mask_threshold = 0.3;
  double object_threshold = 0.3;
  // Approach may tilt this far from straight down; 90 admits side grasps.
  double max_tilt_deg = 90.0;
  // Palm padding for the cloud filter; surface samples are about 4 mm apart.
  double collision_margin = 0.005;
  double table_z = 0.0;
  bool use_rgb = true;
  bool use_3d_range = true;
  bool filter_collisions = true;
  bool nearest_select = true;
  GripperGeometry gripper;
};

Aabb3 object_range(const Affordance3D& aff, double margin);

// Candidates from the cloud's principal frame. When `crop` is given, centers
// outside it are dropped.
std::vector<GraspCandidate> generate_candidates(const PointCloud& cloud, const HgmConfig& cfg,
                                                const Aabb3* crop = nullptr);

// Keeps candidates whose palm box holds no obstacle point and stays above
// `floor_z`. Order preserved.
std::vector<GraspCandidate> filter_collisions(const std::vector<GraspCandidate>& cands, const PointCloud& obstacles,
                                              const GripperGeometry& gripper,
                                              double floor_z = -std::numeric_limits<double>::infinity());
// Primitive variant: palm box against every object except `target_id`.
std::vector<GraspCandidate> filter_collisions(const std::vector<GraspCandidate>& cands, const Scene& scene,
                                              std::string_view target_id, const GripperGeometry& gripper);

// Index of the candidate nearest `center`; ties to higher score, then earlier.
size_t select_nearest_center(const std::vector<GraspCandidate>& cands, const Point3D& center);

struct GraspEstimate {
  GraspCandidate chosen;
  size_t generated = 0;
  size_t survived = 0;
  Point3D center = Point3D::Zero();
};

GraspEstimate estimate_grasp(const PointCloud& scene_cloud, const Affordance3D& aff, const HgmConfig& cfg);

}  // namespace hiertraj
