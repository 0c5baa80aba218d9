#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hiertraj/geometry.hpp"
#include "hiertraj/plan.hpp"
#include "hiertraj/shape.hpp"

namespace hiertraj {

enum class Role { Target, Obstacle, Container, Surface };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct SceneObject {
  std::string id;
  std::string label;
  Shape shape;
  Pose6D pose;
  Role role = Role::Obstacle;
  bool graspable = false;
  std::optional<Point3D> affordance_anchor;  // object frame
  Pose6D initial_pose;

  Aabb3 bounds() const { return world_aabb(shape, pose); }
  double top() const { return bounds().max.z(); }
  double bottom() const { return bounds().min.z(); }
};

struct Scene {
  std::vector<SceneObject> objects;
  Aabb3 workspace = default_workspace();
  Vec3 gravity_down = Vec3(0.0, 0.0, -1.0);
  CameraModel camera = CameraModel::overhead();
  std::optional<std::string> held;  // object attached to the gripper

  const SceneObject* find(std::string_view id) const;
  SceneObject* find(std::string_view id);
  const SceneObject& get(std::string_view id) const;
  int index_of(std::string_view id) const;
  // Checks unique ids, positive dims, centers inside the workspace.
  void validate() const;
};

enum class TaskName { PutBlock, PickupCup, PlayJenga, TakeUmbrella, PushBlock, SortObject };

inline constexpr TaskName kAllTasks[] = {TaskName::PutBlock,     TaskName::PickupCup,
                                         TaskName::PlayJenga,    TaskName::TakeUmbrella,
                                         TaskName::PushBlock,    TaskName::SortObject};

std::string_view to_string(TaskName t);
TaskName task_from_string(std::string_view s);

struct TaskSpec {
  TaskName name = TaskName::PutBlock;
  std::string instruction;
  std::string target_id;
  std::optional<std::string> goal_id;
  std::map<std::string, double> params;

  double param(const std::string& key) const;
};

std::map<std::string, double> default_task_params(TaskName t);
std::string default_instruction(TaskName t);

enum class Jaw { Open, Closed };

struct GripperState {
  Pose6D pose;
  Jaw jaw = Jaw::Open;
  std::optional<std::string> attached;
};

enum class FailureClass { PerceptionFailure, PlanningFailure, GraspFailure, TaskFailure };

std::string_view to_string(FailureClass f);
std::optional<FailureClass> failure_from_string(std::string_view s);

enum class StepKind { Waypoint, JawChange, Abort };

struct ExecStep {
  Pose6D pose;
  Jaw jaw = Jaw::Open;
  StepKind kind = StepKind::Waypoint;
  int plan_index = -1;
};

enum class EventKind { Attach, Detach, EmptyClose, Slip, PushContact, Collision };

struct ExecEvent {
  EventKind kind;
  int plan_index = -1;
  std::string object_id;
  Point3D position = Point3D::Zero();
};

struct ExecutionResult {
  bool success = false;
  std::vector<ExecStep> steps;
  std::optional<FailureClass> failure;
  std::string detail;
  std::vector<ExecEvent> events;
  Scene final_scene;

  bool has_event(EventKind k) const;
  const ExecEvent* first_event(EventKind k) const;
};

// Gripper frame: z = approach, y = closing axis, x = lateral. The pose origin
// is the fingertip center; the collision box is the palm behind it.
struct GripperGeometry {
  Vec3 palm_half = Vec3(0.03, 0.05, 0.05);
  double finger_length = 0.04;

  OrientedBox palm_box(const Pose6D& tip) const;
};

// Approach straight down, closing along world y.
Eigen::Quaterniond default_gripper_orientation();

struct TraceSample {
  Pose6D gripper;
  Jaw jaw;
  std::optional<Pose6D> attached_pose;
};

struct ExecConfig {
  double step = 0.005;
  double attach_tol = 0.02;
  double push_tol = 0.01;
  double contact_tol = 0.002;
  double slip_probability = 0.0;
  std::uint64_t slip_seed = 0;
  GripperGeometry gripper;
  std::function<void(const TraceSample&)> observer;
};

ExecutionResult execute_trajectory(const Scene& scene, const TrajectoryPlan& plan,
                                   const std::optional<Pose6D>& grasp, const ExecConfig& cfg = {});

bool check_success(const Scene& scene, const TaskSpec& task);

std::pair<Scene, TaskSpec> spawn_scene(TaskName task, std::uint64_t seed);

struct RenderOutput {
  DepthImage depth;
  std::vector<int> object_index;  // per pixel, -1 when no hit
  ColorImage color;
};

RenderOutput render_scene(const Scene& scene, const CameraModel& cam);
DepthImage render_depth(const Scene& scene, const CameraModel& cam);

Rgb label_color(std::string_view label);

// Scene file I/O (JSON).
struct SceneFile {
  Scene scene;
  TaskSpec task;
};

SceneFile parse_scene_file(const std::string& text);
SceneFile load_scene_file(const std::string& path);
std::string serialize_scene_file(const Scene& scene, const TaskSpec& task);

}  // namespace hiertraj
