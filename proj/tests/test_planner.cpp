#include <doctest.h>

#include <cmath>
#include <random>

#include "hiertraj/error.hpp"
#include "hiertraj/planner.hpp"
#include "support.hpp"

using namespace hiertraj;
using hiertraj::test::table_box;

namespace {

Affordance3D aff(const std::string& label, std::vector<Point3D> pts) {
  Affordance3D a;
  a.label = label;
  a.points = std::move(pts);
  if (a.points.size() >= 3) a.frame = principal_frame(a.points);
  return a;
}

TaskSpec task_of(TaskName name, const std::string& target, std::optional<std::string> goal = std::nullopt) {
  TaskSpec t;
  t.name = name;
  t.target_id = target;
  t.goal_id = std::move(goal);
  t.params = default_task_params(name);
  return t;
}

std::vector<Vec3> waypoints(const TrajectoryPlan& p) {
  std::vector<Vec3> out;
  for (const auto& s : p.steps)
    if (const auto* w = std::get_if<Waypoint>(&s)) out.push_back(w->position);
  return out;
}

Aabb3 unit_box() { return Aabb3(Point3D::Zero(), Point3D::Ones()); }

}  // namespace

TEST_CASE("skill table") {
  CHECK(select_skill(TaskName::PutBlock) == Skill::PickPlace);
  CHECK(select_skill(TaskName::SortObject) == Skill::PickPlace);
  CHECK(select_skill(TaskName::PickupCup) == Skill::PickLift);
  CHECK(select_skill(TaskName::PlayJenga) == Skill::ExtractAlongAxis);
  CHECK(select_skill(TaskName::TakeUmbrella) == Skill::ExtractVertical);
  CHECK(select_skill(TaskName::PushBlock) == Skill::PushToTarget);
  try {
    select_skill("juggle");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownTask);
  }
}

TEST_CASE("lifted points on a box top sit at its height") {
  Scene s;
  s.objects.push_back(table_box("block", 0.0, 0.0, Vec3(0.04, 0.04, 0.05), 0.0, Role::Target));
  const DepthImage depth = render_depth(s, s.camera);
  AffordanceSet a;
  a.entries.push_back({"block", {{0.5, 0.5}, {0.53, 0.5}, {0.5, 0.47}}});
  const auto lifted = lift_affordances(a, depth, s.camera);
  REQUIRE(lifted.size() == 1);
  REQUIRE(lifted[0].points.size() == 3);
  for (const auto& p : lifted[0].points) CHECK(std::abs(p.z() - 0.10) < 0.005);
  CHECK(lifted[0].frame.has_value());

  AffordanceSet miss;
  miss.entries.push_back({"air", {{0.02, 0.02}, {0.03, 0.03}, {0.02, 0.03}}});
  try {
    lift_affordances(miss, depth, s.camera);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AllPointsInvalid);
  }

  AffordanceSet one;
  one.entries.push_back({"block", {{0.5, 0.5}}});
  const auto single = lift_affordances(one, depth, s.camera);
  CHECK(single[0].points.size() == 1);
  CHECK_FALSE(single[0].frame.has_value());
}

TEST_CASE("pick place transit clears the tallest obstacle") {
  const std::vector<Affordance3D> affs = {
      aff("block", {{0.2, 0.5, 0.05}, {0.22, 0.5, 0.05}, {0.2, 0.52, 0.05}}),
      aff("mat", {{0.8, 0.5, 0.01}, {0.82, 0.5, 0.01}, {0.8, 0.52, 0.01}}),
      aff("tower", {{0.5, 0.5, 0.30}, {0.52, 0.5, 0.30}, {0.5, 0.52, 0.30}}),
  };
  PlannerConfig cfg;
  cfg.transit_clearance = 0.125;
  const PlanOutput out = plan_trajectory(task_of(TaskName::PutBlock, "block", "mat"), affs, cfg, {}, unit_box());
  const auto wps = waypoints(out.plan);
  REQUIRE(wps.size() == 6);
  CHECK(wps[2].z() == doctest::Approx(0.425).epsilon(1e-12));
  CHECK(wps[3].z() == doctest::Approx(0.425).epsilon(1e-12));
  CHECK(validate_plan(out.plan).empty());
  CHECK(std::get<GripperAction>(out.plan.steps[2]) == GripperAction::CloseGripper);

  cfg.ignore_obstacles = true;
  const PlanOutput low = plan_trajectory(task_of(TaskName::PutBlock, "block", "mat"), affs, cfg, {}, unit_box());
  CHECK(waypoints(low.plan)[2].z() < 0.30);
}

TEST_CASE("guardrail raises the clearance") {
  const std::vector<Affordance3D> affs = {
      aff("block", {{0.2, 0.5, 0.05}, {0.22, 0.5, 0.05}, {0.2, 0.52, 0.05}}),
      aff("mat", {{0.8, 0.5, 0.01}, {0.82, 0.5, 0.01}, {0.8, 0.52, 0.01}}),
  };
  const std::vector<KnowledgeItem> k = {
      make_item("a", KnowledgeKind::Guardrail, "x", Outcome::Failure, std::string("transit_clearance"), 0.15),
      make_item("b", KnowledgeKind::Guardrail, "y", Outcome::Failure, std::string("transit_clearance"), 0.2),
      make_item("c", KnowledgeKind::Strategy, "z", Outcome::Success)};
  const PlanOutput out = plan_trajectory(task_of(TaskName::PutBlock, "block", "mat"), affs, {}, k, unit_box());
  CHECK(out.meta.transit_clearance == 0.2);
  CHECK(waypoints(out.plan)[2].z() == doctest::Approx(0.25));
}

TEST_CASE("planner error paths") {
  const std::vector<Affordance3D> affs = {aff("block", {{0.2, 0.5, 0.05}})};
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code([&] { plan_trajectory(task_of(TaskName::PutBlock, "cube", "mat"), affs, {}); }) ==
        ErrorCode::MissingTarget);
  CHECK(code([&] { plan_trajectory(task_of(TaskName::PlayJenga, "block"), affs, {}); }) == ErrorCode::FrameRequired);
  PlannerConfig loose;
  loose.allow_missing_frame = true;
  const PlanOutput out = plan_trajectory(task_of(TaskName::PlayJenga, "block"), affs, loose);
  CHECK(out.meta.axis == Vec3::UnitX());
}

TEST_CASE("extraction points away from the neighbours") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int i = 0; i < 50; ++i) {
    const Point3D c(u(rng), u(rng), 0.1);
    const double yaw = u(rng) * 8;
    const Vec3 ax(std::cos(yaw), std::sin(yaw), 0.0);
    const Vec3 side(-ax.y(), ax.x(), 0.0);
    const std::vector<Affordance3D> affs = {
        aff("piece", {c, c + 0.05 * ax, c - 0.05 * ax + 0.01 * side}),
        aff("stack", {c + Vec3(u(rng), u(rng), 0.0) * 0.3, c + Vec3(u(rng), u(rng), 0.0) * 0.3,
                      c + Vec3(u(rng), u(rng), 0.0) * 0.3 + Vec3(0, 0, 0.01)}),
    };
    const PlanOutput out = plan_trajectory(task_of(TaskName::PlayJenga, "piece"), affs, {});
    CHECK(out.meta.axis.dot(affs[0].centroid() - affs[1].centroid()) >= 0.0);
  }
}

TEST_CASE("plans are affine equivariant") {
  std::vector<Affordance3D> metres = {
      aff("block", {{-0.2, 0.05, 0.03}, {-0.18, 0.05, 0.03}, {-0.2, 0.07, 0.03}}),
      aff("mat", {{0.2, -0.1, 0.01}, {0.22, -0.1, 0.01}, {0.2, -0.08, 0.01}}),
      aff("wall", {{0.0, 0.0, 0.2}, {0.02, 0.0, 0.2}, {0.0, 0.02, 0.2}}),
  };
  // Offsets are metric, so the workspace must be a unit cube for exact equality.
  const Aabb3 cube(Point3D(-0.5, -0.5, 0.0), Point3D(0.5, 0.5, 1.0));
  std::vector<Affordance3D> in_cube;
  for (const auto& a : metres) {
    std::vector<Point3D> pts;
    for (const auto& p : a.points) pts.push_back(normalize_point(p, cube));
    in_cube.push_back(aff(a.label, pts));
  }
  const TaskSpec t = task_of(TaskName::PutBlock, "block", "mat");
  const PlanOutput direct = plan_trajectory(t, metres, {}, {}, cube);
  const PlanOutput normed = plan_trajectory(t, in_cube, {}, {}, unit_box());
  const auto a = waypoints(direct.plan), b = waypoints(normed.plan);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-9);
}

TEST_CASE("validator reports each violation") {
  auto has = [](const TrajectoryPlan& p, PlanViolationKind k) {
    for (const auto& v : validate_plan(p))
      if (v.kind == k) return true;
    return false;
  };
  CHECK(has(TrajectoryPlan{}, PlanViolationKind::Empty));
  TrajectoryPlan many;
  for (int i = 0; i < 21; ++i) many.steps.emplace_back(Waypoint{Vec3::Constant(0.5)});
  CHECK(has(many, PlanViolationKind::Budget));
  TrajectoryPlan twice{{Waypoint{Vec3::Constant(0.5)}, GripperAction::CloseGripper, GripperAction::CloseGripper}};
  CHECK(has(twice, PlanViolationKind::TokenAlternation));
  TrajectoryPlan out_of{{Waypoint{Vec3(1.2, 0.5, 0.5)}}};
  CHECK(has(out_of, PlanViolationKind::Range));
  TrajectoryPlan ok{{Waypoint{Vec3::Constant(0.5)}, GripperAction::Grasp, Waypoint{Vec3::Constant(0.4)},
                     GripperAction::OpenGripper}};
  CHECK(validate_plan(ok).empty());
}
