#include <doctest.h>

#include <algorithm>

#include "hiertraj/error.hpp"
#include "hiertraj/pipeline.hpp"
#include "support.hpp"

using namespace hiertraj;
using hiertraj::test::fixture;

namespace {

EpisodeResult run_fixture(const std::string& name, const std::string& preset, KnowledgeBank* bank = nullptr) {
  const SceneFile f = load_scene_file(fixture(name));
  RunConfig cfg;
  cfg.task = f.task.name;
  cfg = apply_preset(cfg, preset);
  return run_episode(f.scene, f.task, cfg, bank);
}

}  // namespace

TEST_CASE("presets") {
  const auto names = preset_names();
  CHECK(names.size() == 9);
  CHECK(std::find(names.begin(), names.end(), "hgm-no-filter-n") != names.end());
  try {
    apply_preset({}, "nope");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
  CHECK(apply_preset({}, "3dagent-2d").planner.two_d_mode);
  CHECK_FALSE(apply_preset({}, "hgm-no-3d-point").hgm.use_3d_range);
}

TEST_CASE("spawned episodes succeed on every task") {
  for (TaskName t : kAllTasks) {
    RunConfig cfg;
    cfg.task = t;
    cfg.seed = 3;
    const EpisodeResult r = run_episode(cfg);
    CHECK_MESSAGE(r.success, to_string(t), " ", r.detail);
    CHECK(r.judged == Outcome::Success);
    CHECK(validate_plan(r.plan).empty());
  }
}

TEST_CASE("obstacle fixture contrasts") {
  CHECK(run_fixture("obstacle_put_block.json", "default").success);
  CHECK(run_fixture("obstacle_put_block.json", "3dagent-2d").failure == FailureClass::PlanningFailure);
  CHECK(run_fixture("obstacle_put_block.json", "3dagent-no-obstacle").failure == FailureClass::PlanningFailure);
}

TEST_CASE("jenga and clutter contrasts") {
  CHECK(run_fixture("jenga.json", "default").success);
  CHECK_FALSE(run_fixture("jenga.json", "3dagent-1point").success);
  CHECK_FALSE(run_fixture("jenga.json", "hgm-no-filter-c").success);
  CHECK(run_fixture("cluttered_pickup_cup.json", "default").success);
  CHECK(run_fixture("cluttered_pickup_cup.json", "hgm-no-3d-point").failure == FailureClass::GraspFailure);
}

TEST_CASE("guardrail closes the loop") {
  KnowledgeBank bank;
  const EpisodeResult first = run_fixture("guardrail_put_block.json", "default", &bank);
  CHECK(first.failure == FailureClass::PlanningFailure);
  CHECK_FALSE(first.added.empty());
  const EpisodeResult second = run_fixture("guardrail_put_block.json", "default", &bank);
  CHECK(second.success);
  REQUIRE(second.meta.has_value());
  CHECK(second.meta->transit_clearance == doctest::Approx(0.15));
  const EpisodeResult cold = run_fixture("guardrail_put_block.json", "default");
  CHECK(cold.failure == first.failure);
  CHECK(cold.detail == first.detail);
}

TEST_CASE("external backend through a subprocess") {
  const SceneFile f = load_scene_file(fixture("isolated_block.json"));
  RunConfig cfg;
  cfg.backend = "subprocess:cat >/dev/null; echo '<ans>[(0.5, 0.5, 0.5)]</ans>'; echo '<END>'";
  cfg.backend_timeout_s = 5.0;
  const EpisodeResult r = run_episode(f.scene, f.task, cfg);
  CHECK(r.backend_attempts == 1);
  CHECK(r.plan.waypoint_count() == 1);
  CHECK_FALSE(r.success);

  cfg.backend = "subprocess:exit 1";
  const EpisodeResult down = run_episode(f.scene, f.task, cfg);
  CHECK(down.failure == FailureClass::PlanningFailure);
}

TEST_CASE("evaluation is deterministic across worker counts") {
  EvalConfig ec;
  ec.tasks = {TaskName::PutBlock, TaskName::PushBlock};
  ec.episodes = 4;
  ec.seeds = 2;
  ec.workers = 1;
  const std::string one = format_eval_report(run_eval(ec));
  ec.workers = 3;
  CHECK(format_eval_report(run_eval(ec)) == one);
  CHECK(episode_seed(0, 1, 2) == 100002);
}

TEST_CASE("episode report keys") {
  RunConfig cfg;
  cfg.seed = 7;
  const std::string rep = format_episode_report(run_episode(cfg));
  CHECK(rep.find("success=true") != std::string::npos);
  CHECK(rep.find("task=put_block") != std::string::npos);
}

TEST_CASE("heuristic judge agrees with the oracle") {
  int agree = 0;
  for (int i = 0; i < 300; ++i) {
    RunConfig cfg;
    cfg.task = kAllTasks[i % 6];
    cfg.seed = 1000 + i;
    cfg.judge = JudgeMode::Heuristic;
    const EpisodeResult r = run_episode(cfg);
    agree += (r.judged == Outcome::Success) == r.success;
  }
  CHECK(agree >= 270);
}
