#include <algorithm>
#include <cmath>

#include "hiertraj/error.hpp"
#include "hiertraj/planner.hpp"

namespace hiertraj {

Point3D Affordance3D::centroid() const {
  Point3D c = Point3D::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Point3D(c / static_cast<double>(points.size()));
}

double Affordance3D::top() const {
  double z = -1e300;
  for (const auto& p : points) z = std::max(z, p.z());
  return z;
}

std::vector<Affordance3D> lift_affordances(const AffordanceSet& aset, const DepthImage& depth,
                                           const CameraModel& cam) {
  if (depth.width != cam.width || depth.height != cam.height) {
    throw Error(ErrorCode::DimensionMismatch, "depth image does not match the camera");
  }
  std::vector<Affordance3D> out;
  for (const auto& e : aset.entries) {
    Affordance3D a;
    a.label = e.label;
    for (const auto& p : e.points) {
      try {
        a.points.push_back(lift_point(p, depth, cam));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::InvalidDepth) throw;
      }
    }
    if (a.points.empty()) throw Error(ErrorCode::AllPointsInvalid, "every point of '" + e.label + "' missed depth");
    if (a.points.size() >= 3) {
      try {
        a.frame = principal_frame(a.points);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::DegenerateCloud) throw;
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

void refine_frames(std::vector<Affordance3D>& affs, const PointCloud& cloud, double margin) {
  for (auto& a : affs) {
    if (!a.frame || a.points.empty()) continue;
    Point3D lo = a.points.front(), hi = lo;
    for (const auto& p : a.points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const PointCloud local = crop_cloud(cloud, Aabb3(lo, hi).inflated(margin));
    if (local.size() < 3) continue;
    try {
      a.frame = principal_frame(local.points);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::DegenerateCloud) throw;
    }
  }
}

std::string_view to_string(Skill s) {
  switch (s) {
    case Skill::PickPlace: return "PickPlace";
    case Skill::PickLift: return "PickLift";
    case Skill::ExtractAlongAxis: return "ExtractAlongAxis";
    case Skill::ExtractVertical: return "ExtractVertical";
    case Skill::PushToTarget: return "PushToTarget";
  }
  return "?";
}

Skill select_skill(TaskName task) {
  switch (task) {
    case TaskName::PutBlock:
    case TaskName::SortObject: return Skill::PickPlace;
    case TaskName::PickupCup: return Skill::PickLift;
    case TaskName::PlayJenga: return Skill::ExtractAlongAxis;
    case TaskName::TakeUmbrella: return Skill::ExtractVertical;
    case TaskName::PushBlock: return Skill::PushToTarget;
  }
  throw Error(ErrorCode::UnknownTask, "no skill for task");
}

Skill select_skill(std::string_view task_name) { return select_skill(task_from_string(task_name)); }

namespace {

constexpr double kPlaceGap = 0.005;
constexpr double kLiftMargin = 0.03;
constexpr double kExtractMargin = 0.04;
constexpr double kPushRunUp = 0.03;
constexpr double kPushLead = 0.01;

class Builder {
 public:
  explicit Builder(const Aabb3& ws) : ws_(ws) {}

  void move(const Point3D& p) { steps_.emplace_back(p); }
  void act(GripperAction a) { steps_.emplace_back(a); }

  TrajectoryPlan finish(bool flatten, double flat_z) const {
    TrajectoryPlan plan;
    size_t last_wp = 0;
    for (size_t i = 0; i < steps_.size(); ++i)
      if (std::holds_alternative<Point3D>(steps_[i])) last_wp = i;
    for (size_t i = 0; i < steps_.size(); ++i) {
      if (const auto* p = std::get_if<Point3D>(&steps_[i])) {
        Point3D q = *p;
        if (flatten && i != last_wp) q.z() = flat_z;
        Vec3 n = normalize_point(q, ws_);
        for (int k = 0; k < 3; ++k) n[k] = std::clamp(n[k], 0.0, 1.0);
        plan.steps.push_back(Waypoint{n});
      } else {
        plan.steps.push_back(std::get<GripperAction>(steps_[i]));
      }
    }
    return plan;
  }

 private:
  Aabb3 ws_;
  std::vector<std::variant<Point3D, GripperAction>> steps_;
};

const Affordance3D* find_aff(const std::vector<Affordance3D>& affs, std::string_view label) {
  for (const auto& a : affs)
    if (a.label == label) return &a;
  return nullptr;
}

Vec3 horizontal(const Vec3& v) { return Vec3(v.x(), v.y(), 0.0); }

}  // namespace

PlanOutput plan_trajectory(const TaskSpec& task, const std::vector<Affordance3D>& affordances,
                           const PlannerConfig& cfg, const std::vector<KnowledgeItem>& knowledge,
                           const Aabb3& workspace) {
  if (cfg.pre_grasp_offset <= 0 || cfg.transit_clearance <= 0 || cfg.retreat_offset <= 0) {
    throw Error(ErrorCode::InvalidArgument, "planner offsets must be positive");
  }
  const Affordance3D* target = find_aff(affordances, task.target_id);
  if (!target || target->points.empty()) throw Error(ErrorCode::MissingTarget, "no affordance for '" + task.target_id + "'");
  const Affordance3D* goal = task.goal_id ? find_aff(affordances, *task.goal_id) : nullptr;

  PlanOutput out;
  PlanMetadata& meta = out.meta;
  meta.skill = select_skill(task.name);
  meta.transit_clearance = cfg.transit_clearance;
  for (const auto& item : knowledge) {
    if (item.kind == KnowledgeKind::Guardrail && item.key == "transit_clearance" && item.value) {
      meta.transit_clearance = std::max(meta.transit_clearance, *item.value);
    }
  }
  const double clearance = meta.transit_clearance;
  const Vec3 up = Vec3::UnitZ();
  const Point3D c = target->centroid();
  const Point3D g(c.x(), c.y(), target->top());
  meta.grasp_point = g;
  if (goal) meta.goal = goal->centroid();

  double obstacle_top = workspace.min.z();
  Point3D obstacle_sum = Point3D::Zero();
  int obstacle_n = 0;
  for (const auto& a : affordances) {
    if (a.label == task.target_id || a.points.empty()) continue;
    obstacle_top = std::max(obstacle_top, a.top());
    obstacle_sum += a.centroid();
    ++obstacle_n;
  }

  Builder b(workspace);
  switch (meta.skill) {
    case Skill::PickPlace: {
      if (!goal) throw Error(ErrorCode::MissingTarget, "no affordance for the goal");
      double zt = g.z() + clearance;
      if (!cfg.ignore_obstacles) zt = std::max(zt, obstacle_top + clearance);
      meta.transit_z = zt;
      const Point3D gc = goal->centroid();
      const double height = target->top() - workspace.min.z();
      const Point3D place(gc.x(), gc.y(), goal->top() + height + kPlaceGap);
      b.move(g + up * cfg.pre_grasp_offset);
      b.move(g);
      b.act(GripperAction::CloseGripper);
      b.move(Point3D(g.x(), g.y(), zt));
      b.move(Point3D(gc.x(), gc.y(), zt));
      b.move(place);
      b.act(GripperAction::OpenGripper);
      b.move(place + up * cfg.retreat_offset);
      meta.axis = up;
      break;
    }
    case Skill::PickLift: {
      b.move(g + up * cfg.pre_grasp_offset);
      b.move(g);
      b.act(GripperAction::CloseGripper);
      b.move(g + up * (task.param("lift") + kLiftMargin));
      meta.axis = up;
      meta.transit_z = g.z() + task.param("lift") + kLiftMargin;
      break;
    }
    case Skill::ExtractAlongAxis: {
      Vec3 axis = Vec3::UnitX();
      if (target->frame) {
        axis = horizontal(target->frame->axes[0]);
        if (axis.norm() < 1e-9) axis = Vec3::UnitX();
        axis.normalize();
        if (obstacle_n > 0 && !cfg.ignore_obstacles) {
          const Vec3 away = horizontal(c - obstacle_sum / obstacle_n);
          if (axis.dot(away) < 0) axis = -axis;
        }
      } else if (!cfg.allow_missing_frame) {
        throw Error(ErrorCode::FrameRequired, "extraction needs a target frame");
      }
      meta.axis = axis;
      const Point3D out_pt = g + axis * (task.param("extract") + kExtractMargin);
      b.move(g + up * cfg.pre_grasp_offset);
      b.move(g);
      b.act(GripperAction::CloseGripper);
      b.move(out_pt);
      b.move(out_pt + up * cfg.retreat_offset);
      meta.transit_z = g.z();
      break;
    }
    case Skill::ExtractVertical: {
      const double lift = task.param("lift") + kLiftMargin;
      b.move(g + up * cfg.pre_grasp_offset);
      b.move(g);
      b.act(GripperAction::CloseGripper);
      b.move(g + up * lift);
      meta.axis = up;
      meta.transit_z = g.z() + lift;
      break;
    }
    case Skill::PushToTarget: {
      if (!goal) throw Error(ErrorCode::MissingTarget, "no affordance for the goal");
      const Point3D gc = goal->centroid();
      Vec3 dir = horizontal(gc - c);
      dir = dir.norm() < 1e-9 ? Vec3::UnitX() : Vec3(dir.normalized());
      double reach = 0.01;
      for (const auto& p : target->points) reach = std::max(reach, std::abs(horizontal(p - c).dot(dir)));
      const double z = workspace.min.z() + 0.5 * (target->top() - workspace.min.z());
      const Point3D start = Point3D(c.x(), c.y(), z) - dir * (reach + kPushRunUp);
      const Point3D end = Point3D(gc.x(), gc.y(), z) - dir * (reach + kPushLead);
      b.move(Point3D(start.x(), start.y(), target->top() + cfg.pre_grasp_offset));
      b.act(GripperAction::CloseGripper);
      b.move(start);
      b.move(end);
      b.move(end + up * cfg.retreat_offset);
      meta.axis = dir;
      meta.transit_z = z;
      break;
    }
  }
  out.plan = b.finish(cfg.two_d_mode, g.z());
  if (out.plan.waypoint_count() > static_cast<size_t>(kMaxWaypoints)) {
    throw Error(ErrorCode::BudgetExceeded, "template expanded past the waypoint budget");
  }
  return out;
}

}  // namespace hiertraj
