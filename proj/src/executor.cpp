#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "hiertraj/world.hpp"

namespace hiertraj {

Eigen::Quaterniond default_gripper_orientation() {
  return canonical_quaternion(Eigen::Quaterniond(0.0, 1.0, 0.0, 0.0));
}

OrientedBox GripperGeometry::palm_box(const Pose6D& tip) const {
  OrientedBox box;
  box.pose = Pose6D(tip.transform(Vec3(0.0, 0.0, -(finger_length + palm_half.z()))), tip.orientation);
  box.half_extents = palm_half;
  return box;
}

namespace {

struct Command {
  bool is_move = false;
  Point3D target = Point3D::Zero();
  GripperAction action = GripperAction::OpenGripper;
  int plan_index = -1;
};

class Executor {
 public:
  Executor(const Scene& scene, const ExecConfig& cfg) : cfg_(cfg), rng_(cfg.slip_seed) {
    result_.final_scene = scene;
    result_.final_scene.held.reset();
  }

  ExecutionResult run(const TrajectoryPlan& plan, const std::optional<Pose6D>& grasp) {
    std::vector<Command> cmds = commands(plan, grasp);
    if (cmds.empty() || !cmds.front().is_move) {
      result_.failure = FailureClass::TaskFailure;
      result_.detail = "no motion";
      return std::move(result_);
    }
    orientation_ = grasp ? grasp->orientation : default_gripper_orientation();
    tip_ = cmds.front().target;
    notify();
    if (!check_collisions(cmds.front().plan_index, {})) return std::move(result_);
    record(StepKind::Waypoint, cmds.front().plan_index);

    for (size_t i = 1; i < cmds.size(); ++i) {
      const Command& c = cmds[i];
      if (c.is_move) {
        if (!move_to(c.target, c.plan_index)) return std::move(result_);
        record(StepKind::Waypoint, c.plan_index);
      } else if (is_closing(c.action)) {
        close(c.plan_index);
      } else {
        open(c.plan_index);
      }
    }
    result_.success = true;
    result_.final_scene.held = attached_ >= 0 ? std::optional<std::string>(objects()[attached_].id) : std::nullopt;
    return std::move(result_);
  }

 private:
  std::vector<SceneObject>& objects() { return result_.final_scene.objects; }
  Scene& scene() { return result_.final_scene; }

  std::vector<Command> commands(const TrajectoryPlan& plan, const std::optional<Pose6D>& grasp) const {
    std::vector<Command> out;
    for (size_t i = 0; i < plan.steps.size(); ++i) {
      Command c;
      c.plan_index = static_cast<int>(i);
      if (const auto* w = std::get_if<Waypoint>(&plan.steps[i])) {
        c.is_move = true;
        c.target = denormalize_point(w->position, result_.final_scene.workspace);
      } else {
        c.action = std::get<GripperAction>(plan.steps[i]);
      }
      out.push_back(c);
    }
    if (grasp) {
      // The waypoint leading into the first close is the estimated grasp pose.
      for (size_t i = 0; i < out.size(); ++i) {
        if (out[i].is_move || !is_closing(out[i].action)) continue;
        for (size_t j = i; j-- > 0;) {
          if (out[j].is_move) {
            out[j].target = grasp->position;
            break;
          }
        }
        break;
      }
    }
    return out;
  }

  Pose6D gripper_pose() const { return Pose6D(tip_, orientation_); }

  void notify() {
    if (!cfg_.observer) return;
    TraceSample s{gripper_pose(), jaw_, std::nullopt};
    if (attached_ >= 0) s.attached_pose = objects()[attached_].pose;
    cfg_.observer(s);
  }

  void record(StepKind kind, int plan_index) {
    result_.steps.push_back(ExecStep{gripper_pose(), jaw_, kind, plan_index});
  }

  void event(EventKind kind, int plan_index, const std::string& id) {
    result_.events.push_back(ExecEvent{kind, plan_index, id, tip_});
  }

  bool below_table(const Shape& s, const Pose6D& p) const {
    return world_aabb(s, p).min.z() < scene().workspace.min.z() - cfg_.contact_tol;
  }
  const Scene& scene() const { return result_.final_scene; }

  bool fail_collision(int plan_index, const std::string& what, const std::string& with) {
    event(EventKind::Collision, plan_index, with);
    record(StepKind::Abort, plan_index);
    result_.failure = FailureClass::PlanningFailure;
    result_.detail = "collision: " + what + " hit " + with + " at plan step " + std::to_string(plan_index);
    return false;
  }

  // Returns false (and fills the failure) when anything moving penetrates.
  bool check_collisions(int plan_index, const std::vector<int>& pushed) {
    const OrientedBox palm = cfg_.gripper.palm_box(gripper_pose());
    const Shape palm_shape = Shape::box(palm.half_extents.x(), palm.half_extents.y(), palm.half_extents.z());
    if (below_table(palm_shape, palm.pose)) return fail_collision(plan_index, "gripper", "table");
    auto& objs = objects();
    for (size_t k = 0; k < objs.size(); ++k) {
      if (static_cast<int>(k) == attached_) continue;
      if (shapes_intersect(palm_shape, palm.pose, objs[k].shape.shrunk(cfg_.contact_tol), objs[k].pose)) {
        return fail_collision(plan_index, "gripper", objs[k].id);
      }
    }
    if (attached_ >= 0) {
      const SceneObject& a = objs[attached_];
      if (below_table(a.shape, a.pose)) return fail_collision(plan_index, a.id, "table");
      for (size_t k = 0; k < objs.size(); ++k) {
        if (static_cast<int>(k) == attached_) continue;
        if (shapes_intersect(a.shape, a.pose, objs[k].shape.shrunk(cfg_.contact_tol), objs[k].pose)) {
          return fail_collision(plan_index, a.id, objs[k].id);
        }
      }
    }
    for (int p : pushed) {
      const SceneObject& a = objs[p];
      for (size_t k = 0; k < objs.size(); ++k) {
        if (static_cast<int>(k) == p || objs[k].role == Role::Surface) continue;
        if (shapes_intersect(a.shape, a.pose, objs[k].shape.shrunk(cfg_.contact_tol), objs[k].pose)) {
          return fail_collision(plan_index, a.id, objs[k].id);
        }
      }
    }
    return true;
  }

  std::vector<int> push(const Vec3& delta, int plan_index) {
    std::vector<int> pushed;
    if (jaw_ != Jaw::Closed || attached_ >= 0) return pushed;
    const double dxy = std::hypot(delta.x(), delta.y());
    if (dxy < 1e-12 || std::abs(delta.z()) > 0.25 * dxy) return pushed;
    const Point3D prev = tip_ - delta;
    auto& objs = objects();
    for (size_t k = 0; k < objs.size(); ++k) {
      SceneObject& o = objs[k];
      if (!o.graspable || o.role == Role::Surface) continue;
      if (distance_to_solid(o.shape, o.pose, prev) > cfg_.push_tol) continue;
      const Vec3 ahead = o.pose.position - prev;
      if (ahead.x() * delta.x() + ahead.y() * delta.y() <= 0.0) continue;
      o.pose.position += Vec3(delta.x(), delta.y(), 0.0);
      if (!pushing_.count(static_cast<int>(k))) {
        pushing_.insert(static_cast<int>(k));
        event(EventKind::PushContact, plan_index, o.id);
      }
      pushed.push_back(static_cast<int>(k));
    }
    return pushed;
  }

  bool move_to(const Point3D& target, int plan_index) {
    const Point3D start = tip_;
    const double len = (target - start).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(len / cfg_.step - 1e-9)));
    for (int i = 1; i <= n; ++i) {
      const Point3D p = i == n ? target : Point3D(start + (target - start) * (static_cast<double>(i) / n));
      const Vec3 delta = p - tip_;
      tip_ = p;
      if (attached_ >= 0) objects()[attached_].pose = gripper_pose().compose(grip_);
      const std::vector<int> pushed = push(delta, plan_index);
      notify();
      if (!check_collisions(plan_index, pushed)) return false;
    }
    return true;
  }

  void close(int plan_index) {
    jaw_ = Jaw::Closed;
    auto& objs = objects();
    int best = -1;
    double best_d = cfg_.attach_tol;
    for (size_t k = 0; k < objs.size(); ++k) {
      if (!objs[k].graspable || objs[k].role == Role::Surface) continue;
      const double d = distance_to_solid(objs[k].shape, objs[k].pose, tip_);
      if (d <= best_d && (best < 0 || d < best_d)) {
        best = static_cast<int>(k);
        best_d = d;
      }
    }
    if (best < 0) {
      event(EventKind::EmptyClose, plan_index, "");
    } else if (cfg_.slip_probability > 0.0 &&
               std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < cfg_.slip_probability) {
      event(EventKind::Slip, plan_index, objs[best].id);
    } else {
      attached_ = best;
      grip_ = gripper_pose().inverse().compose(objs[best].pose);
      event(EventKind::Attach, plan_index, objs[best].id);
    }
    pushing_.clear();
    record(StepKind::JawChange, plan_index);
    notify();
  }

  void open(int plan_index) {
    jaw_ = Jaw::Open;
    pushing_.clear();
    if (attached_ >= 0) {
      const int k = attached_;
      attached_ = -1;
      drop(k);
      event(EventKind::Detach, plan_index, objects()[k].id);
    }
    record(StepKind::JawChange, plan_index);
    notify();
  }

  void drop(int k) {
    auto& objs = objects();
    SceneObject& o = objs[k];
    const Aabb3 b = o.bounds();
    double support = scene().workspace.min.z();
    for (size_t j = 0; j < objs.size(); ++j) {
      if (static_cast<int>(j) == k) continue;
      const Aabb3 s = objs[j].bounds();
      const bool overlap = s.min.x() < b.max.x() && b.min.x() < s.max.x() && s.min.y() < b.max.y() &&
                           b.min.y() < s.max.y();
      if (overlap && s.max.z() <= b.min.z() + 1e-6) support = std::max(support, s.max.z());
    }
    o.pose.position.z() -= b.min.z() - support;
  }

  const ExecConfig& cfg_;
  std::mt19937_64 rng_;
  ExecutionResult result_;
  Point3D tip_ = Point3D::Zero();
  Eigen::Quaterniond orientation_ = Eigen::Quaterniond::Identity();
  Jaw jaw_ = Jaw::Open;
  int attached_ = -1;
  Pose6D grip_;
  std::set<int> pushing_;
};

}  // namespace

ExecutionResult execute_trajectory(const Scene& scene, const TrajectoryPlan& plan,
                                   const std::optional<Pose6D>& grasp, const ExecConfig& cfg) {
  Executor ex(scene, cfg);
  return ex.run(plan, grasp);
}

}  // namespace hiertraj
