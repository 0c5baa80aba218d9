#include <doctest.h>

#include <cmath>
#include <random>

#include "hiertraj/error.hpp"
#include "hiertraj/world.hpp"

using namespace hiertraj;

namespace {

SceneObject object(const std::string& id, Shape s, const Point3D& p, Role role = Role::Obstacle,
                   bool graspable = false, double yaw = 0.0) {
  SceneObject o;
  o.id = id;
  o.label = id;
  o.shape = s;
  o.pose = Pose6D(p, Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
  o.initial_pose = o.pose;
  o.role = role;
  o.graspable = graspable;
  return o;
}

Waypoint wp(const Point3D& metres) { return Waypoint{normalize_point(metres, default_workspace())}; }

TrajectoryPlan plan_of(std::initializer_list<PlanStep> steps) { return TrajectoryPlan{steps}; }

// Separating-axis test for two oriented boxes.
bool sat_boxes(const Vec3& ha, const Pose6D& pa, const Vec3& hb, const Pose6D& pb) {
  const Mat3 ra = pa.rotation(), rb = pb.rotation();
  const Vec3 t = pb.position - pa.position;
  std::vector<Vec3> axes;
  for (int i = 0; i < 3; ++i) axes.push_back(ra.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(rb.col(i));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const Vec3 c = ra.col(i).cross(rb.col(j));
      if (c.norm() > 1e-9) axes.push_back(c.normalized());
    }
  }
  for (const auto& l : axes) {
    double proj_a = 0, proj_b = 0;
    for (int i = 0; i < 3; ++i) {
      proj_a += ha[i] * std::abs(ra.col(i).dot(l));
      proj_b += hb[i] * std::abs(rb.col(i).dot(l));
    }
    if (std::abs(t.dot(l)) > proj_a + proj_b) return false;
  }
  return true;
}

double sat_margin(const Vec3& ha, const Pose6D& pa, const Vec3& hb, const Pose6D& pb) {
  const Mat3 ra = pa.rotation(), rb = pb.rotation();
  const Vec3 t = pb.position - pa.position;
  double best = 1e300;
  std::vector<Vec3> axes;
  for (int i = 0; i < 3; ++i) axes.push_back(ra.col(i));
  for (int i = 0; i < 3; ++i) axes.push_back(rb.col(i));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const Vec3 c = ra.col(i).cross(rb.col(j));
      if (c.norm() > 1e-6) axes.push_back(c.normalized());
    }
  for (const auto& l : axes) {
    double proj = 0;
    for (int i = 0; i < 3; ++i) proj += ha[i] * std::abs(ra.col(i).dot(l)) + hb[i] * std::abs(rb.col(i).dot(l));
    best = std::min(best, std::abs(std::abs(t.dot(l)) - proj));
  }
  return best;
}

}  // namespace

TEST_CASE("render_depth of an empty scene is all sentinel") {
  Scene scene;
  const DepthImage d = render_depth(scene, CameraModel::overhead());
  CHECK(d.valid_count() == 0);
  CHECK(d.depth.size() == 256u * 256u);
}

TEST_CASE("render_depth of a sphere on the optical axis") {
  Scene scene;
  scene.workspace = Aabb3(Point3D(-5, -5, -5), Point3D(5, 5, 5));
  scene.objects.push_back(object("ball", Shape::sphere(0.1), Point3D(0, 0, 1)));
  CameraModel cam;
  cam.extrinsic = Pose6D();
  cam.width = cam.height = 257;
  cam.cx = cam.cy = 128.0;
  const DepthImage d = render_depth(scene, cam);
  CHECK(d.at(128, 128) == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("render_depth reports the nearest of occluding primitives") {
  Scene scene;
  scene.objects.push_back(object("ball", Shape::sphere(0.08), Point3D(0.02, 0.01, 0.08)));
  scene.objects.push_back(object("slab", Shape::box(0.05, 0.04, 0.01), Point3D(0.0, 0.0, 0.2), Role::Obstacle,
                                 false, 0.4));
  scene.objects.push_back(object("can", Shape::cylinder(0.03, 0.05), Point3D(-0.1, 0.05, 0.05)));
  const CameraModel cam = CameraModel::overhead();
  const RenderOutput out = render_scene(scene, cam);

  // Ray march each primitive with its own membership test.
  auto inside = [&](const SceneObject& o, const Point3D& p) {
    const Vec3 l = o.pose.inverse_transform(p);
    switch (o.shape.kind) {
      case ShapeKind::Sphere: return l.norm() <= o.shape.dims[0];
      case ShapeKind::Box:
        return std::abs(l.x()) <= o.shape.dims.x() && std::abs(l.y()) <= o.shape.dims.y() &&
               std::abs(l.z()) <= o.shape.dims.z();
      case ShapeKind::Cylinder:
        return std::hypot(l.x(), l.y()) <= o.shape.dims[0] && std::abs(l.z()) <= o.shape.dims[1];
    }
    return false;
  };
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pix(95, 160);
  const double step = 2e-5;
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const int r = pix(rng), c = pix(rng);
    const Vec3 dir = cam.ray_direction(r, c);
    double best = 0.0;
    for (const auto& o : scene.objects) {
      for (double t = 0.7; t <= 1.0; t += step) {
        if (inside(o, cam.extrinsic.position + t * dir)) {
          if (best == 0.0 || t < best) best = t;
          break;
        }
      }
    }
    const float got = out.depth.at(r, c);
    if (best == 0.0) {
      CHECK(got == 0.0f);
    } else {
      ++hits;
      CHECK(std::abs(got - best) <= step + 1e-6);
    }
  }
  CHECK(hits > 100);
}

TEST_CASE("shapes_intersect agrees with closed-form tests") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(-0.15, 0.15);
  std::uniform_real_distribution<double> size(0.01, 0.08);
  std::normal_distribution<double> n(0.0, 1.0);
  auto rand_pose = [&] {
    return Pose6D(Point3D(pos(rng), pos(rng), pos(rng)),
                  Eigen::Quaterniond(Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)).normalized()));
  };
  int checked = 0, overlapping = 0;
  for (int i = 0; i < 3000; ++i) {
    const Pose6D pa = rand_pose(), pb = rand_pose();
    const Vec3 ha(size(rng), size(rng), size(rng)), hb(size(rng), size(rng), size(rng));
    // box-box against SAT
    if (sat_margin(ha, pa, hb, pb) > 1e-7) {
      const bool expect = sat_boxes(ha, pa, hb, pb);
      CHECK(shapes_intersect(Shape::box(ha.x(), ha.y(), ha.z()), pa, Shape::box(hb.x(), hb.y(), hb.z()), pb) ==
            expect);
      ++checked;
      overlapping += expect ? 1 : 0;
    }
    // sphere-box against the closest-point distance
    const double r = size(rng);
    const double gap = distance_to_solid(Shape::box(ha.x(), ha.y(), ha.z()), pa, pb.position) - r;
    if (std::abs(gap) > 1e-7) {
      CHECK(shapes_intersect(Shape::sphere(r), pb, Shape::box(ha.x(), ha.y(), ha.z()), pa) == (gap < 0));
    }
    // sphere-sphere
    const double r2 = size(rng);
    const double d = (pa.position - pb.position).norm() - r - r2;
    if (std::abs(d) > 1e-7) CHECK(shapes_intersect(Shape::sphere(r), pa, Shape::sphere(r2), pb) == (d < 0));
  }
  CHECK(checked > 2000);
  CHECK(overlapping > 100);
}

TEST_CASE("empty plan is a task failure") {
  Scene scene;
  const ExecutionResult r = execute_trajectory(scene, TrajectoryPlan{}, std::nullopt);
  CHECK_FALSE(r.success);
  REQUIRE(r.failure.has_value());
  CHECK(*r.failure == FailureClass::TaskFailure);
  CHECK(r.detail == "no motion");
}

TEST_CASE("pick and lift attaches the block and carries it to the lift height") {
  Scene scene;
  scene.objects.push_back(object("block", Shape::box(0.02, 0.02, 0.02), Point3D(0.1, 0.1, 0.02), Role::Target, true));
  const TrajectoryPlan plan = plan_of({wp({0.1, 0.1, 0.2}), wp({0.1, 0.1, 0.04}), GripperAction::CloseGripper,
                                       wp({0.1, 0.1, 0.15}), wp({0.1, 0.1, 0.25}), wp({0.12, 0.1, 0.25})});
  const Pose6D grasp(Point3D(0.1, 0.1, 0.04), default_gripper_orientation());
  const ExecutionResult r = execute_trajectory(scene, plan, grasp);
  REQUIRE(r.success);
  REQUIRE(r.final_scene.held.has_value());
  CHECK(*r.final_scene.held == "block");
  // Rigid carry: the block keeps its 0.02 offset below the fingertip.
  const Point3D p = r.final_scene.get("block").pose.position;
  CHECK(p.x() == doctest::Approx(0.12));
  CHECK(p.z() == doctest::Approx(0.23));
  CHECK(r.has_event(EventKind::Attach));
}

TEST_CASE("open drops the object onto the highest support") {
  Scene scene;
  scene.objects.push_back(object("block", Shape::box(0.02, 0.02, 0.02), Point3D(0.0, 0.0, 0.02), Role::Target, true));
  scene.objects.push_back(object("mat", Shape::box(0.06, 0.06, 0.005), Point3D(0.2, 0.0, 0.005), Role::Surface));
  const TrajectoryPlan plan = plan_of({wp({0, 0, 0.1}), wp({0, 0, 0.04}), GripperAction::CloseGripper,
                                       wp({0, 0, 0.2}), wp({0.2, 0, 0.2}), wp({0.2, 0, 0.1}),
                                       GripperAction::OpenGripper, wp({0.2, 0, 0.2})});
  const ExecutionResult r = execute_trajectory(scene, plan, std::nullopt);
  REQUIRE(r.success);
  CHECK_FALSE(r.final_scene.held.has_value());
  CHECK(r.final_scene.get("block").bottom() == doctest::Approx(0.01));
  CHECK(r.has_event(EventKind::Detach));
}

TEST_CASE("a plan through an obstacle aborts at the first penetrating sample") {
  Scene scene;
  const Vec3 half(0.03, 0.03, 0.1);
  const Point3D center(0.0, 0.0, 0.1);
  scene.objects.push_back(object("wall", Shape::box(half.x(), half.y(), half.z()), center));
  const Point3D a(-0.2, 0.0, 0.05), b(0.2, 0.0, 0.05);
  const TrajectoryPlan plan = plan_of({wp(a), wp(b)});
  ExecConfig cfg;
  const ExecutionResult r = execute_trajectory(scene, plan, std::nullopt, cfg);
  REQUIRE(r.failure.has_value());
  CHECK(*r.failure == FailureClass::PlanningFailure);

  // Axis-aligned palm vs the shrunk wall: interval overlap on each axis.
  const Vec3 palm_half = cfg.gripper.palm_half;
  const double palm_offset = cfg.gripper.finger_length + palm_half.z();
  const Vec3 wall = half.array() - cfg.contact_tol;
  const Point3D a_m = denormalize_point(normalize_point(a, scene.workspace), scene.workspace);
  const Point3D b_m = denormalize_point(normalize_point(b, scene.workspace), scene.workspace);
  const int n = static_cast<int>(std::ceil((b_m - a_m).norm() / cfg.step - 1e-9));
  int first = -1;
  for (int i = 0; i <= n && first < 0; ++i) {
    const Point3D tip = a_m + (b_m - a_m) * (static_cast<double>(i) / n);
    const Point3D palm(tip.x(), tip.y(), tip.z() + palm_offset);  // palm sits above a downward tip
    const Vec3 palm_ext(palm_half.x(), palm_half.y(), palm_half.z());
    bool hit = true;
    for (int k = 0; k < 3; ++k) hit = hit && std::abs(palm[k] - center[k]) <= palm_ext[k] + wall[k];
    if (hit) first = i;
  }
  REQUIRE(first > 0);
  const Point3D expect = a_m + (b_m - a_m) * (static_cast<double>(first) / n);
  REQUIRE(!r.steps.empty());
  CHECK(r.steps.back().kind == StepKind::Abort);
  CHECK((r.steps.back().pose.position - expect).norm() < 1e-12);
}

TEST_CASE("attached object keeps its pose relative to the gripper") {
  Scene scene;
  scene.objects.push_back(object("cup", Shape::cylinder(0.02, 0.04), Point3D(-0.1, 0.05, 0.04), Role::Target, true));
  const Eigen::Quaterniond tilt(Eigen::AngleAxisd(0.3, Vec3(1, 1, 0).normalized()) *
                                Eigen::Quaterniond(default_gripper_orientation()));
  const Pose6D grasp(Point3D(-0.1, 0.05, 0.075), tilt);
  const TrajectoryPlan plan = plan_of({wp({-0.1, 0.05, 0.2}), wp({-0.1, 0.05, 0.08}), GripperAction::CloseGripper,
                                       wp({-0.1, 0.05, 0.3}), wp({0.2, -0.1, 0.3}), wp({0.2, -0.1, 0.2}),
                                       GripperAction::OpenGripper, wp({0.2, -0.1, 0.3})});
  std::optional<Pose6D> rel;
  double worst = 0.0;
  int samples = 0;
  ExecConfig cfg;
  cfg.observer = [&](const TraceSample& s) {
    if (!s.attached_pose) {
      rel.reset();
      return;
    }
    const Pose6D now = s.gripper.inverse().compose(*s.attached_pose);
    if (!rel) {
      rel = now;
      return;
    }
    ++samples;
    worst = std::max(worst, (now.position - rel->position).norm());
    worst = std::max(worst, (now.orientation.coeffs() - rel->orientation.coeffs()).norm());
  };
  const ExecutionResult r = execute_trajectory(scene, plan, grasp, cfg);
  REQUIRE(r.success);
  CHECK(samples > 50);
  CHECK(worst < 1e-12);
}

TEST_CASE("execution is deterministic") {
  auto [scene, task] = spawn_scene(TaskName::PutBlock, 4);
  const TrajectoryPlan plan = plan_of({wp({-0.3, 0.3, 0.3}), GripperAction::CloseGripper, wp({0.3, 0.3, 0.3}),
                                       GripperAction::OpenGripper, wp({0.3, -0.3, 0.4})});
  const ExecutionResult a = execute_trajectory(scene, plan, std::nullopt);
  const ExecutionResult b = execute_trajectory(scene, plan, std::nullopt);
  REQUIRE(a.steps.size() == b.steps.size());
  for (size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].pose == b.steps[i].pose);
  CHECK(a.detail == b.detail);
}

TEST_CASE("thin objects cannot be tunneled through") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  std::uniform_real_distribution<double> th(0.004, 0.02);
  for (int i = 0; i < 100; ++i) {
    Scene scene;
    const double t = th(rng);
    const Point3D c(u(rng), u(rng), 0.15);
    scene.objects.push_back(object("pane", Shape::box(t / 2, 0.04, 0.04), c, Role::Obstacle, false,
                                   std::uniform_real_distribution<double>(-0.5, 0.5)(rng)));
    ExecConfig cfg;
    cfg.step = t / 2;
    cfg.contact_tol = 0.0;
    // Carry a small ball straight through the pane.
    scene.objects.push_back(object("ball", Shape::sphere(0.002), Point3D(c.x() - 0.1, c.y(), 0.13), Role::Target, true));
    const TrajectoryPlan plan = plan_of({wp({c.x() - 0.1, c.y(), 0.131}), GripperAction::CloseGripper,
                                         wp({c.x() - 0.1, c.y(), 0.15}), wp({c.x() + 0.1, c.y(), 0.15})});
    cfg.gripper.finger_length = 0.5;  // keep the palm out of the way
    const ExecutionResult r = execute_trajectory(scene, plan, std::nullopt, cfg);
    REQUIRE(r.failure.has_value());
    CHECK(*r.failure == FailureClass::PlanningFailure);
    CHECK(r.detail.find("pane") != std::string::npos);
  }
}

TEST_CASE("push moves a block along a closed-jaw sweep") {
  Scene scene;
  scene.objects.push_back(object("block", Shape::box(0.02, 0.02, 0.02), Point3D(0.0, 0.0, 0.02), Role::Target, true));
  const TrajectoryPlan plan = plan_of({wp({-0.1, 0, 0.2}), GripperAction::CloseGripper, wp({-0.1, 0, 0.02}),
                                       wp({0.1, 0, 0.02}), wp({0.1, 0, 0.2})});
  const ExecutionResult r = execute_trajectory(scene, plan, std::nullopt);
  REQUIRE(r.success);
  CHECK(r.has_event(EventKind::PushContact));
  const double x = r.final_scene.get("block").pose.position.x();
  // Contact happens once the tip is within push_tol of the near face.
  CHECK(x > 0.1 + 0.02 - 0.001);
  CHECK(x <= 0.1 + 0.02 + 0.01 + 1e-9);
}

TEST_CASE("check_success is false on every untouched spawned scene") {
  for (TaskName t : kAllTasks) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto [scene, task] = spawn_scene(t, seed);
      CHECK_FALSE(check_success(scene, task));
    }
  }
}

TEST_CASE("check_success predicates") {
  auto [scene, task] = spawn_scene(TaskName::PutBlock, 1);
  SceneObject* block = scene.find("green_block");
  const SceneObject& mat = scene.get("red_mat");
  block->pose.position = Point3D(mat.pose.position.x(), mat.pose.position.y(), mat.top() + 0.02);
  CHECK(check_success(scene, task));

  auto [jscene, jtask] = spawn_scene(TaskName::PlayJenga, 2);
  SceneObject* target = jscene.find("jenga_target");
  const Vec3 axis = target->initial_pose.rotation().col(0);
  target->pose.position += 0.08 * axis;
  CHECK(check_success(jscene, jtask));
  jscene.find("jenga_0")->pose.position += Vec3(0.02, 0, 0);
  CHECK_FALSE(check_success(jscene, jtask));

  auto [pscene, ptask] = spawn_scene(TaskName::PushBlock, 3);
  pscene.find("red_block")->pose.position.head<2>() = pscene.get("green_target").pose.position.head<2>();
  CHECK(check_success(pscene, ptask));
}

TEST_CASE("spawn_scene is deterministic") {
  for (TaskName t : kAllTasks) {
    auto [a, ta] = spawn_scene(t, 42);
    auto [b, tb] = spawn_scene(t, 42);
    CHECK(serialize_scene_file(a, ta) == serialize_scene_file(b, tb));
  }
  CHECK_THROWS_AS(task_from_string("juggle"), Error);
}

TEST_CASE("put_block scenes keep objects apart") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto [scene, task] = spawn_scene(TaskName::PutBlock, seed);
    for (size_t i = 0; i < scene.objects.size(); ++i) {
      for (size_t j = i + 1; j < scene.objects.size(); ++j) {
        const Aabb3 a = scene.objects[i].bounds(), b = scene.objects[j].bounds();
        double gap2 = 0.0;
        for (int k = 0; k < 2; ++k) {
          const double g = std::max({0.0, a.min[k] - b.max[k], b.min[k] - a.max[k]});
          gap2 += g * g;
        }
        CHECK(std::sqrt(gap2) >= 0.02);
      }
    }
  }
}

TEST_CASE("pickup_cup target positions are uniform over the region") {
  const int n = 2000;
  int counts[4][4] = {};
  for (int seed = 0; seed < n; ++seed) {
    auto [scene, task] = spawn_scene(TaskName::PickupCup, static_cast<std::uint64_t>(seed));
    const Point3D p = scene.get("red_cup").pose.position;
    const int ix = std::min(3, static_cast<int>((p.x() + 0.25) / 0.125));
    const int iy = std::min(3, static_cast<int>((p.y() + 0.25) / 0.125));
    ++counts[ix][iy];
  }
  double chi2 = 0.0;
  const double expect = n / 16.0;
  for (auto& row : counts)
    for (int c : row) chi2 += (c - expect) * (c - expect) / expect;
  // 99th percentile of chi-square with 15 degrees of freedom.
  CHECK(chi2 < 30.578);
}

TEST_CASE("scene files round trip and reject unknown keys") {
  auto [scene, task] = spawn_scene(TaskName::SortObject, 8);
  const std::string text = serialize_scene_file(scene, task);
  const SceneFile back = parse_scene_file(text);
  CHECK(serialize_scene_file(back.scene, back.task) == text);

  std::string extra = text;
  extra.insert(extra.find('{') + 1, "\"colour\": 1,");
  try {
    parse_scene_file(extra);
    FAIL("expected SceneFormat");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SceneFormat);
  }
  CHECK_THROWS_AS(parse_scene_file("{not json"), Error);
}
