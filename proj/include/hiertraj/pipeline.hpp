#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hiertraj/grasp.hpp"
#include "hiertraj/knowledge.hpp"
#include "hiertraj/perception.hpp"
#include "hiertraj/planner.hpp"
#include "hiertraj/protocol.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

struct RunConfig {
  TaskName task = TaskName::PutBlock;
  std::uint64_t seed = 0;
  std::string preset = "default";
  PerceptionConfig perception;
  PlannerConfig planner;
  HgmConfig hgm;
  ExecConfig exec;
  // Perceive only the target and goal instead of every visible object.
  bool task_objects_only = false;
  // "builtin", "subprocess:CMD" or "http:URL".
  std::string backend = "builtin";
  double backend_timeout_s = 60.0;
  int backend_retries = 2;
  JudgeMode judge = JudgeMode::Oracle;
  size_t retrieve_k = 5;
};

std::vector<std::string> preset_names();
// Applies a named ablation on top of `cfg`; throws InvalidArgument for an
// unknown name.
RunConfig apply_preset(RunConfig cfg, std::string_view preset);

struct EpisodeResult {
  TaskName task = TaskName::PutBlock;
  std::uint64_t seed = 0;
  std::string preset;
  std::string instruction;
  bool success = false;  // ground truth on the final scene
  Outcome judged = Outcome::Failure;
  std::optional<FailureClass> failure;
  std::string detail;
  TrajectoryPlan plan;
  std::optional<PlanMetadata> meta;
  std::optional<GraspEstimate> grasp;
  std::optional<ExecutionResult> exec;
  std::vector<std::string> retrieved;  // knowledge item ids
  std::vector<std::string> added;      // item ids consolidated after the episode
  int backend_attempts = 0;
};

// Perception, lift, retrieval, planning, grasp estimation, execution and
// judging on `scene`. With a bank, the extracted knowledge is consolidated
// into it afterwards.
EpisodeResult run_episode(const Scene& scene, const TaskSpec& task, const RunConfig& cfg,
                          KnowledgeBank* bank = nullptr);
// Spawns the scene from cfg.task and cfg.seed first.
EpisodeResult run_episode(const RunConfig& cfg, KnowledgeBank* bank = nullptr);

std::string format_episode_report(const EpisodeResult& r);

struct EvalConfig {
  std::vector<TaskName> tasks;
  int episodes = 50;
  int seeds = 3;
  std::uint64_t base_seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency
  RunConfig base;        // preset already applied
};

struct EvalRow {
  TaskName task = TaskName::PutBlock;
  std::string preset;
  double mean = 0.0;
  double std = 0.0;
  int episodes = 0;
  int seeds = 0;
  std::vector<double> seed_rates;
};

// Seed of episode `e` in seed group `s`.
std::uint64_t episode_seed(std::uint64_t base_seed, int s, int e);

std::vector<EvalRow> run_eval(const EvalConfig& cfg);
std::string format_eval_report(const std::vector<EvalRow>& rows);

}  // namespace hiertraj
