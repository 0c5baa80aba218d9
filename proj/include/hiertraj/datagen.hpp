#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hiertraj/geometry.hpp"
#include "hiertraj/knowledge.hpp"
#include "hiertraj/pipeline.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

struct Frame {
  int index = 0;
  Pose6D pose;
  Jaw jaw = Jaw::Open;
  std::optional<DepthImage> depth;

  bool operator==(const Frame&) const = default;
};

struct Demonstration {
  std::string instruction;
  std::uint64_t seed = 0;
  TaskName task = TaskName::PutBlock;
  std::string scene;  // scene file the episode ran on, empty when spawned from the seed
  std::vector<Frame> frames;
  Outcome outcome = Outcome::Failure;
  std::optional<FailureClass> failure;
  std::map<std::string, double> thresholds;

  bool operator==(const Demonstration&) const = default;
};

struct ManifestCounts {
  std::map<TaskName, std::pair<int, int>> per_task;  // (successes, failures)
  int total = 0;

  bool operator==(const ManifestCounts&) const = default;
};

struct Dataset {
  std::vector<Demonstration> demos;

  ManifestCounts manifest() const;
  bool operator==(const Dataset&) const = default;
};

// One frame per executed waypoint, jaw change and abort. The first and last
// frames carry depth renders of the initial and final scene.
Demonstration record_episode(const EpisodeResult& result, const Scene& initial, const TaskSpec& task,
                             const ExecConfig& exec, const std::string& scene_ref = "");

Dataset filter_successes(const Dataset& ds);

void export_dataset(const Dataset& ds, const std::string& dir);
Dataset import_dataset(const std::string& dir);
// One record file; depth paths resolve against its directory.
Demonstration load_demonstration(const std::string& path);

// Rebuilds the plan and grasp from the frames of `demo`.
TrajectoryPlan replay_plan(const Demonstration& demo, const Aabb3& workspace, std::optional<Pose6D>* grasp);
// Re-executes `demo` on `scene` and reports whether the task succeeds.
bool replay_demonstration(const Demonstration& demo, const Scene& scene, const TaskSpec& task,
                          const ExecConfig& exec = {});

// Mean and sample standard deviation (n-1) of per-seed success rates.
std::pair<double, double> success_stats(std::span<const double> rates);
double success_rate(const std::vector<bool>& outcomes);

double linear_fit_slope(std::span<const std::pair<double, double>> points);

}  // namespace hiertraj
