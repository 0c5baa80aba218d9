#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "hiertraj/datagen.hpp"
#include "hiertraj/error.hpp"

using namespace hiertraj;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hiertraj_" + name);
  fs::remove_all(p);
  return p;
}

Demonstration random_demo(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Demonstration d;
  d.instruction = "move\tthe block " + std::to_string(rng() % 100);
  d.seed = rng();
  d.task = kAllTasks[rng() % 6];
  d.scene = rng() % 2 ? "" : "scenes/a.json";
  d.outcome = rng() % 3 ? Outcome::Success : Outcome::Failure;
  if (d.outcome == Outcome::Failure) d.failure = FailureClass::GraspFailure;
  d.thresholds = {{"attach_tol", 0.02}, {"radius", u(rng)}};
  const int n = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < n; ++i) {
    Frame f;
    f.index = i;
    f.pose = Pose6D(Point3D(u(rng), u(rng), u(rng)),
                    Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng)).normalized());
    f.jaw = rng() % 2 ? Jaw::Open : Jaw::Closed;
    if (i == 0 || i == n - 1) {
      DepthImage img(5, 4);
      for (auto& v : img.depth) v = static_cast<float>(u(rng));
      f.depth = img;
    }
    d.frames.push_back(f);
  }
  return d;
}

ErrorCode import_code(const fs::path& dir) {
  try {
    import_dataset(dir.string());
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("success statistics") {
  const std::vector<double> a = {100, 100, 100}, b = {80, 90, 100}, c = {72};
  CHECK(success_stats(a) == std::pair<double, double>{100.0, 0.0});
  CHECK(success_stats(b) == std::pair<double, double>{90.0, 10.0});
  CHECK(success_stats(c) == std::pair<double, double>{72.0, 0.0});
  const std::vector<double> rev = {100, 80, 90};
  CHECK(success_stats(rev) == success_stats(b));
  CHECK_THROWS_AS(success_stats(std::vector<double>{}), Error);
  CHECK(success_rate({true, false, true, true}) == 75.0);
}

TEST_CASE("least squares slope") {
  std::vector<std::pair<double, double>> line;
  for (double x : {10.0, 20.0, 40.0, 80.0}) line.emplace_back(x, 0.5 * x + 3.0);
  CHECK(std::abs(linear_fit_slope(line) - 0.5) <= 1e-12);
  const std::vector<std::pair<double, double>> flat = {{1, 4}, {2, 4}, {7, 4}};
  CHECK(linear_fit_slope(flat) == 0.0);
  // Sxy = 2012.5 and Sxx = 2875 for this set.
  const std::vector<std::pair<double, double>> pts = {{10, 40}, {20, 50}, {40, 65}, {80, 90}};
  CHECK(std::abs(linear_fit_slope(pts) - 0.7) <= 1e-12);
  std::vector<std::pair<double, double>> scaled = pts;
  for (auto& p : scaled) p.second *= 3.0;
  CHECK(std::abs(linear_fit_slope(scaled) - 2.1) <= 1e-12);

  const std::vector<std::pair<double, double>> same_x = {{3, 1}, {3, 2}};
  try {
    linear_fit_slope(same_x);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateX);
  }
}

TEST_CASE("filtering keeps successes") {
  std::mt19937_64 rng(1);
  Dataset ds;
  for (int i = 0; i < 10; ++i) {
    Demonstration d = random_demo(rng);
    d.outcome = i < 7 ? Outcome::Success : Outcome::Failure;
    ds.demos.push_back(d);
  }
  const Dataset kept = filter_successes(ds);
  CHECK(kept.demos.size() == 7);
  CHECK(filter_successes(kept) == kept);
  CHECK(kept.manifest().total == 7);
  Dataset fails;
  fails.demos.assign(3, ds.demos.back());
  CHECK(filter_successes(fails).demos.empty());
}

TEST_CASE("export import round trip") {
  std::mt19937_64 rng(99);
  Dataset ds;
  for (int i = 0; i < 30; ++i) ds.demos.push_back(random_demo(rng));
  const fs::path dir = scratch("roundtrip");
  export_dataset(ds, dir.string());
  const Dataset back = import_dataset(dir.string());
  REQUIRE(back.demos.size() == ds.demos.size());
  for (size_t i = 0; i < ds.demos.size(); ++i) CHECK(back.demos[i] == ds.demos[i]);
  CHECK(back.manifest() == ds.manifest());

  const fs::path depth = dir / "demo_00000_f0000.depth";
  REQUIRE(fs::exists(depth));
  fs::resize_file(depth, fs::file_size(depth) - 1);
  CHECK(import_code(dir) == ErrorCode::CorruptFrame);
  fs::remove_all(dir);
}

TEST_CASE("empty dataset and wrong version") {
  const fs::path dir = scratch("empty");
  export_dataset(Dataset{}, dir.string());
  const Dataset back = import_dataset(dir.string());
  CHECK(back.demos.empty());
  CHECK(back.manifest().total == 0);
  {
    std::ofstream out(dir / "manifest.txt");
    out << "hiertraj-dataset v2\ndemos 0\n";
  }
  CHECK(import_code(dir) == ErrorCode::SchemaVersionMismatch);
  fs::remove_all(dir);
}

TEST_CASE("recorded episodes") {
  RunConfig cfg;
  cfg.task = TaskName::PutBlock;
  cfg.seed = 7;
  const auto [scene, task] = spawn_scene(cfg.task, cfg.seed);
  const EpisodeResult r = run_episode(scene, task, cfg);
  REQUIRE(r.success);
  const Demonstration d = record_episode(r, scene, task, cfg.exec);
  CHECK(d.outcome == Outcome::Success);
  int flips = 0;
  for (size_t i = 1; i < d.frames.size(); ++i) flips += d.frames[i].jaw != d.frames[i - 1].jaw;
  CHECK(flips == 2);
  CHECK(d.frames.front().depth.has_value());
  CHECK(d.frames.back().depth.has_value());
  CHECK(record_episode(run_episode(scene, task, cfg), scene, task, cfg.exec) == d);
  CHECK(replay_demonstration(d, scene, task, cfg.exec));

  RunConfig blind = apply_preset(cfg, "3dagent-no-obstacle");
  const SceneFile f = load_scene_file(std::string(HIERTRAJ_FIXTURE_DIR) + "/obstacle_put_block.json");
  const EpisodeResult bad = run_episode(f.scene, f.task, blind);
  REQUIRE(bad.failure == FailureClass::PlanningFailure);
  const Demonstration fd = record_episode(bad, f.scene, f.task, blind.exec);
  CHECK(fd.outcome == Outcome::Failure);
  CHECK(fd.failure == FailureClass::PlanningFailure);
  REQUIRE(bad.exec.has_value());
  CHECK(fd.frames.size() == bad.exec->steps.size());
  CHECK(bad.exec->steps.back().kind == StepKind::Abort);
}
