#include "hiertraj/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hiertraj/error.hpp"

namespace hiertraj {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Target: return "target";
    case Role::Obstacle: return "obstacle";
    case Role::Container: return "container";
    case Role::Surface: return "surface";
  }
  return "";
}

Role role_from_string(std::string_view s) {
  if (s == "target") return Role::Target;
  if (s == "obstacle") return Role::Obstacle;
  if (s == "container") return Role::Container;
  if (s == "surface") return Role::Surface;
  throw Error(ErrorCode::SceneFormat, "unknown role '" + std::string(s) + "'");
}

std::string_view to_string(TaskName t) {
  switch (t) {
    case TaskName::PutBlock: return "put_block";
    case TaskName::PickupCup: return "pickup_cup";
    case TaskName::PlayJenga: return "play_jenga";
    case TaskName::TakeUmbrella: return "take_umbrella";
    case TaskName::PushBlock: return "push_block";
    case TaskName::SortObject: return "sort_object";
  }
  return "";
}

TaskName task_from_string(std::string_view s) {
  for (TaskName t : kAllTasks) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::UnknownTask, "unknown task '" + std::string(s) + "'");
}

std::string_view to_string(FailureClass f) {
  switch (f) {
    case FailureClass::PerceptionFailure: return "PerceptionFailure";
    case FailureClass::PlanningFailure: return "PlanningFailure";
    case FailureClass::GraspFailure: return "GraspFailure";
    case FailureClass::TaskFailure: return "TaskFailure";
  }
  return "";
}

std::optional<FailureClass> failure_from_string(std::string_view s) {
  for (auto f : {FailureClass::PerceptionFailure, FailureClass::PlanningFailure,
                 FailureClass::GraspFailure, FailureClass::TaskFailure}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

const SceneObject* Scene::find(std::string_view id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

SceneObject* Scene::find(std::string_view id) {
  for (auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

const SceneObject& Scene::get(std::string_view id) const {
  const SceneObject* o = find(id);
  if (!o) throw Error(ErrorCode::MissingTarget, "no object '" + std::string(id) + "'");
  return *o;
}

int Scene::index_of(std::string_view id) const {
  for (size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void Scene::validate() const {
  std::set<std::string> ids;
  for (const auto& o : objects) {
    if (o.id.empty()) throw Error(ErrorCode::SceneFormat, "object id must not be empty");
    if (!ids.insert(o.id).second) throw Error(ErrorCode::DuplicateId, "duplicate object id '" + o.id + "'");
    o.shape.validate();
    if (!workspace.contains(o.pose.position)) {
      throw Error(ErrorCode::SceneFormat, "object '" + o.id + "' center outside workspace");
    }
  }
}

double TaskSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it != params.end()) return it->second;
  const auto defaults = default_task_params(name);
  auto d = defaults.find(key);
  if (d != defaults.end()) return d->second;
  throw Error(ErrorCode::InvalidArgument, "task parameter '" + key + "' not set");
}

std::map<std::string, double> default_task_params(TaskName t) {
  switch (t) {
    case TaskName::PutBlock:
    case TaskName::SortObject: return {{"rest_tol", 0.01}};
    case TaskName::PickupCup: return {{"lift", 0.15}};
    case TaskName::PlayJenga: return {{"extract", 0.08}, {"neighbor_tol", 0.01}};
    case TaskName::TakeUmbrella: return {{"lift", 0.20}};
    case TaskName::PushBlock: return {{"goal_radius", 0.05}};
  }
  return {};
}

std::string default_instruction(TaskName t) {
  switch (t) {
    case TaskName::PutBlock: return "put the green block on the red mat";
    case TaskName::PickupCup: return "pick up the red cup";
    case TaskName::PlayJenga: return "pull the protruding block out of the jenga tower";
    case TaskName::TakeUmbrella: return "take the umbrella out of the umbrella stand";
    case TaskName::PushBlock: return "push the red block to the green target";
    case TaskName::SortObject: return "put the mustard bottle into the red container";
  }
  return "";
}

bool ExecutionResult::has_event(EventKind k) const { return first_event(k) != nullptr; }

const ExecEvent* ExecutionResult::first_event(EventKind k) const {
  for (const auto& e : events) {
    if (e.kind == k) return &e;
  }
  return nullptr;
}

namespace {

// Longest local axis of the shape, expressed in world coordinates.
Vec3 long_axis(const SceneObject& o) {
  const Vec3 h = o.shape.local_half_extents();
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (h[i] > h[best]) best = i;
  }
  return o.initial_pose.rotation().col(best);
}

bool xy_inside(const SceneObject& goal, const Point3D& p) {
  const Vec3 l = goal.pose.inverse_transform(p);
  switch (goal.shape.kind) {
    case ShapeKind::Box:
      return std::abs(l.x()) <= goal.shape.dims.x() && std::abs(l.y()) <= goal.shape.dims.y();
    case ShapeKind::Cylinder:
    case ShapeKind::Sphere:
      return std::hypot(l.x(), l.y()) <= goal.shape.dims[0];
  }
  return false;
}

const SceneObject& goal_of(const Scene& scene, const TaskSpec& task) {
  if (!task.goal_id) throw Error(ErrorCode::MissingTarget, "task needs a goal object");
  return scene.get(*task.goal_id);
}

}  // namespace

bool check_success(const Scene& scene, const TaskSpec& task) {
  const SceneObject& target = scene.get(task.target_id);
  const bool held = scene.held && *scene.held == target.id;
  switch (task.name) {
    case TaskName::PutBlock:
    case TaskName::SortObject: {
      const SceneObject& goal = goal_of(scene, task);
      if (held) return false;
      return xy_inside(goal, target.pose.position) &&
             std::abs(target.bottom() - goal.top()) <= task.param("rest_tol");
    }
    case TaskName::PickupCup:
      return held && target.pose.position.z() >= target.initial_pose.position.z() + task.param("lift") - 1e-9;
    case TaskName::PlayJenga: {
      const Vec3 axis = long_axis(target);
      const double moved = std::abs((target.pose.position - target.initial_pose.position).dot(axis));
      if (moved < task.param("extract") - 1e-9) return false;
      for (const auto& o : scene.objects) {
        if (o.id == target.id || o.role == Role::Surface) continue;
        if ((o.pose.position - o.initial_pose.position).norm() >= task.param("neighbor_tol")) return false;
      }
      return true;
    }
    case TaskName::TakeUmbrella: {
      double stand_top = -1e9;
      for (const auto& o : scene.objects) {
        if (o.role == Role::Container) stand_top = std::max(stand_top, o.top());
      }
      return target.bottom() > stand_top;
    }
    case TaskName::PushBlock: {
      const SceneObject& goal = goal_of(scene, task);
      const Vec3 d = target.pose.position - goal.pose.position;
      return std::hypot(d.x(), d.y()) <= task.param("goal_radius");
    }
  }
  throw Error(ErrorCode::UnknownTask, "unknown task");
}

}  // namespace hiertraj
