#include <algorithm>
#include <cmath>
#include <numbers>

#include "hiertraj/error.hpp"
#include "hiertraj/grasp.hpp"

namespace hiertraj {

Aabb3 object_range(const Affordance3D& aff, double margin) {
  if (aff.points.empty()) throw Error(ErrorCode::InvalidArgument, "object_range needs at least one point");
  Point3D lo = aff.points.front(), hi = aff.points.front();
  for (const auto& p : aff.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return Aabb3(lo, hi).inflated(margin);
}

namespace {

constexpr double kJawClearance = 0.01;
constexpr double kRgbBonus = 0.1;
constexpr double kRgbVariance = 0.01;
constexpr double kFingerHalfWidth = 0.01;
constexpr double kFingerDepth = 0.02;
// A thinner spread means the camera saw a single face along that axis.
constexpr double kMinClosingExtent = 0.004;
constexpr double kFingerSlack = 0.005;

double color_variance(const PointCloud& cloud, const Pose6D& pose, double width) {
  const Mat3 r = pose.rotation();
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  size_t n = 0;
  for (size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 d = cloud.points[i] - pose.position;
    if (std::abs(d.dot(r.col(0))) > kFingerHalfWidth) continue;
    if (std::abs(d.dot(r.col(1))) > 0.5 * width) continue;
    if (std::abs(d.dot(r.col(2))) > kFingerDepth) continue;
    const Rgb& c = cloud.colors[i];
    const Eigen::Vector3d v(c.r, c.g, c.b);
    sum += v;
    sq += v.cwiseProduct(v);
    ++n;
  }
  if (n == 0) return 1e300;
  const Eigen::Vector3d mean = sum / static_cast<double>(n);
  return (sq / static_cast<double>(n) - mean.cwiseProduct(mean)).mean();
}

}  // namespace

std::vector<GraspCandidate> generate_candidates(const PointCloud& cloud, const HgmConfig& cfg, const Aabb3* crop) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "no points to grasp");
  const PrincipalFrame f = principal_frame(cloud.points);
  const double cos_limit = std::cos(cfg.max_tilt_deg * std::numbers::pi / 180.0);

  struct Family {
    int close, approach;
    Vec3 dir;
  };
  std::vector<Family> families;
  for (int ci : {1, 2}) {
    if (f.extents[ci] < kMinClosingExtent) continue;
    if (2.0 * f.extents[ci] + kJawClearance > kMaxJawOpening) continue;
    for (int ai = 0; ai < 3; ++ai) {
      if (ai == ci) continue;
      Vec3 dir = f.axes[ai];
      if (dir.z() > 0) dir = -dir;
      if (-dir.z() < cos_limit - 1e-12) continue;
      families.push_back({ci, ai, dir});
    }
  }
  // Steepest approach first; stable so ties keep axis order.
  std::stable_sort(families.begin(), families.end(),
                   [](const Family& a, const Family& b) { return a.dir.z() < b.dir.z() - 1e-9; });

  std::vector<GraspCandidate> out;
  for (const Family& fam : families) {
    const Vec3 close = f.axes[fam.close];
    const double width = 2.0 * f.extents[fam.close] + kJawClearance;
    Mat3 r;
    r.col(1) = close;
    r.col(2) = fam.dir;
    r.col(0) = close.cross(fam.dir);
    for (double t : {-0.5, 0.0, 0.5}) {
      const Point3D center = f.centroid + t * f.extents[0] * f.axes[0];
      if (crop && !crop->contains(center)) continue;
      GraspCandidate g;
      g.pose = Pose6D::from_rotation(center, r);
      // Fingers reach only finger_length past the palm; back off until every
      // seen point lies within that depth.
      double behind = 0.0;
      for (const auto& p : cloud.points) behind = std::max(behind, -(p - center).dot(fam.dir));
      const double reach = cfg.gripper.finger_length - kFingerSlack;
      if (behind > reach) g.pose.position -= (behind - reach) * fam.dir;
      g.width = width;
      g.score = 1.0 - width / kMaxJawOpening;
      if (cfg.use_rgb && cloud.has_colors() && color_variance(cloud, g.pose, width) < kRgbVariance) {
        g.score = std::min(1.0, g.score + kRgbBonus);
      }
      if (g.score < cfg.object_threshold) continue;
      out.push_back(g);
    }
  }
  return out;
}

std::vector<GraspCandidate> filter_collisions(const std::vector<GraspCandidate>& cands, const PointCloud& obstacles,
                                              const GripperGeometry& gripper, double floor_z) {
  std::vector<GraspCandidate> out;
  for (const auto& c : cands) {
    const OrientedBox palm = gripper.palm_box(c.pose);
    const Mat3 rt = palm.pose.rotation().transpose();
    const Aabb3 bounds =
        world_aabb(Shape::box(palm.half_extents.x(), palm.half_extents.y(), palm.half_extents.z()), palm.pose);
    bool hit = bounds.min.z() < floor_z;
    for (const auto& p : obstacles.points) {
      if (hit) break;
      if (!bounds.contains(p)) continue;
      const Vec3 l = rt * (p - palm.pose.position);
      if (std::abs(l.x()) <= palm.half_extents.x() && std::abs(l.y()) <= palm.half_extents.y() &&
          std::abs(l.z()) <= palm.half_extents.z()) {
        hit = true;
        break;
      }
    }
    if (!hit) out.push_back(c);
  }
  return out;
}

std::vector<GraspCandidate> filter_collisions(const std::vector<GraspCandidate>& cands, const Scene& scene,
                                              std::string_view target_id, const GripperGeometry& gripper) {
  std::vector<GraspCandidate> out;
  for (const auto& c : cands) {
    const OrientedBox palm = gripper.palm_box(c.pose);
    const Shape box = Shape::box(palm.half_extents.x(), palm.half_extents.y(), palm.half_extents.z());
    bool hit = false;
    for (const auto& o : scene.objects) {
      if (o.id == target_id) continue;
      if (shapes_intersect(box, palm.pose, o.shape, o.pose)) {
        hit = true;
        break;
      }
    }
    if (!hit) out.push_back(c);
  }
  return out;
}

size_t select_nearest_center(const std::vector<GraspCandidate>& cands, const Point3D& center) {
  if (cands.empty()) throw Error(ErrorCode::NoCandidates, "no grasp candidates to select from");
  size_t best = 0;
  double best_d = (cands[0].pose.position - center).norm();
  for (size_t i = 1; i < cands.size(); ++i) {
    const double d = (cands[i].pose.position - center).norm();
    if (d < best_d || (d == best_d && cands[i].score > cands[best].score)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

GraspEstimate estimate_grasp(const PointCloud& scene_cloud, const Affordance3D& aff, const HgmConfig& cfg) {
  if (aff.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty target affordance");
  GraspEstimate est;
  est.center = aff.centroid();
  const GripperGeometry& gr = cfg.gripper;
  const double reach = gr.finger_length + 2.0 * gr.palm_half.maxCoeff() + kMaxJawOpening;

  PointCloud cloud, obstacles;
  std::optional<Aabb3> range;
  if (cfg.use_3d_range) {
    range = object_range(aff, cfg.crop_margin);
    // One pass collects both the target crop and its collision neighbourhood.
    const Aabb3 near = range->inflated(reach);
    const bool colors = scene_cloud.has_colors();
    for (size_t i = 0; i < scene_cloud.points.size(); ++i) {
      const Point3D& p = scene_cloud.points[i];
      if (!near.contains(p)) continue;
      obstacles.points.push_back(p);
      if (!range->contains(p)) continue;
      cloud.points.push_back(p);
      if (colors) cloud.colors.push_back(scene_cloud.colors[i]);
    }
    const double floor_pts = cfg.mask_threshold / 100.0 * static_cast<double>(scene_cloud.size());
    if (cloud.size() < 3 || static_cast<double>(cloud.size()) < floor_pts) {
      throw Error(ErrorCode::EmptyCloud, "cropped cloud holds " + std::to_string(cloud.size()) + " points");
    }
  } else {
    cloud = scene_cloud;
  }

  std::vector<GraspCandidate> cands;
  try {
    cands = generate_candidates(cloud, cfg, range ? &*range : nullptr);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateCloud) throw Error(ErrorCode::NoCandidates, e.what());
    throw;
  }
  est.generated = cands.size();
  if (cfg.filter_collisions) {
    GripperGeometry padded = gr;
    padded.palm_half += Vec3::Constant(cfg.collision_margin);
    cands = filter_collisions(cands, cfg.use_3d_range ? obstacles : scene_cloud, padded, cfg.table_z);
  }
  est.survived = cands.size();
  if (cands.empty()) throw Error(ErrorCode::NoCandidates, "every grasp candidate was rejected");
  est.chosen = cfg.nearest_select ? cands[select_nearest_center(cands, est.center)] : cands.front();
  return est;
}

}  // namespace hiertraj
