#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

#include "hiertraj/datagen.hpp"
#include "hiertraj/error.hpp"
#include "hiertraj/pipeline.hpp"

namespace hiertraj {

namespace {

struct Preset {
  const char* name;
  void (*apply)(RunConfig&);
};

const Preset kPresets[] = {
    {"default", [](RunConfig&) {}},
    {"generalvla-no-pa",
     [](RunConfig& c) {
       c.perception.n_max = 1;
       c.perception.error_rate = 0.2;
       c.perception.noise_px = std::max(c.perception.noise_px, 3.0);
     }},
    {"3dagent-2d", [](RunConfig& c) { c.planner.two_d_mode = true; }},
    {"3dagent-1point",
     [](RunConfig& c) {
       c.perception.points_per_object = 1;
       c.planner.allow_missing_frame = true;
     }},
    {"3dagent-no-obstacle",
     [](RunConfig& c) {
       c.planner.ignore_obstacles = true;
       c.task_objects_only = true;
     }},
    {"hgm-no-rgb", [](RunConfig& c) { c.hgm.use_rgb = false; }},
    {"hgm-no-3d-point", [](RunConfig& c) { c.hgm.use_3d_range = false; }},
    {"hgm-no-filter-c", [](RunConfig& c) { c.hgm.filter_collisions = false; }},
    {"hgm-no-filter-n", [](RunConfig& c) { c.hgm.nearest_select = false; }},
};

std::string f3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

bool perception_code(ErrorCode c) {
  return c == ErrorCode::ObjectNotVisible || c == ErrorCode::EmptyMask || c == ErrorCode::InsufficientSpread ||
         c == ErrorCode::AllPointsInvalid || c == ErrorCode::BackendFailure || c == ErrorCode::DuplicateLabel;
}

const Affordance3D* find_aff(const std::vector<Affordance3D>& affs, std::string_view label) {
  for (const auto& a : affs) {
    if (a.label == label) return &a;
  }
  return nullptr;
}

void fail(EpisodeResult& r, FailureClass f, std::string detail) {
  r.failure = f;
  r.detail = std::move(detail);
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

RunConfig apply_preset(RunConfig cfg, std::string_view preset) {
  for (const auto& p : kPresets) {
    if (preset == p.name) {
      p.apply(cfg);
      cfg.preset = p.name;
      return cfg;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown preset '" + std::string(preset) + "'");
}

EpisodeResult run_episode(const Scene& scene, const TaskSpec& task, const RunConfig& cfg, KnowledgeBank* bank) {
  EpisodeResult r;
  r.task = task.name;
  r.seed = cfg.seed;
  r.preset = cfg.preset;
  r.instruction = task.instruction;
  const CameraModel& cam = scene.camera;
  const Skill skill = select_skill(task.name);

  // Perception and lifting.
  const RenderOutput render = render_scene(scene, cam);
  std::vector<Affordance3D> affs;
  try {
    std::vector<std::string> labels = visible_objects(scene, render);
    if (std::find(labels.begin(), labels.end(), task.target_id) == labels.end()) {
      throw Error(ErrorCode::ObjectNotVisible, "target '" + task.target_id + "' is not visible");
    }
    if (cfg.task_objects_only) {
      std::erase_if(labels, [&](const std::string& l) { return l != task.target_id && l != task.goal_id; });
    }
    PerceptionConfig pc = cfg.perception;
    pc.seed = cfg.perception.seed ^ cfg.seed;
    auto backend = synthetic_backend(scene, cam, render, pc.error_rate, pc.seed);
    const AffordanceSet aset = detect_affordances(*backend, labels, pc);
    affs = lift_affordances(aset, render.depth, cam);
    refine_frames(affs, backproject_cloud(render.depth, nullptr, cam), cfg.hgm.crop_margin);
  } catch (const Error& e) {
    if (!perception_code(e.code())) throw;
    fail(r, FailureClass::PerceptionFailure, e.what());
  }

  std::vector<KnowledgeItem> knowledge;
  if (!r.failure && bank) {
    for (auto& hit : bank->retrieve(task.instruction, cfg.retrieve_k)) {
      r.retrieved.push_back(hit.item.id);
      knowledge.push_back(std::move(hit.item));
    }
  }

  // Planning.
  if (!r.failure) {
    try {
      if (cfg.backend == "builtin") {
        PlanOutput out = plan_trajectory(task, affs, cfg.planner, knowledge, scene.workspace);
        r.plan = std::move(out.plan);
        r.meta = out.meta;
      } else {
        ExchangeConfig ex = parse_backend_spec(cfg.backend);
        ex.timeout_s = cfg.backend_timeout_s;
        ex.retries = cfg.backend_retries;
        std::string prompt = format_agent_prompt(task.instruction, normalize_affordances(affs, scene.workspace));
        if (!knowledge.empty()) {
          prompt += "\nRelevant experience:\n";
          for (const auto& k : knowledge) prompt += "- " + k.text + "\n";
        }
        ExternalPlan ext = external_plan(ex, prompt);
        r.plan = std::move(ext.plan);
        r.backend_attempts = ext.attempts;
        PlanMetadata meta;
        meta.skill = skill;
        if (const Affordance3D* t = find_aff(affs, task.target_id)) meta.grasp_point = t->centroid();
        if (task.goal_id) {
          if (const Affordance3D* g = find_aff(affs, *task.goal_id)) meta.goal = g->centroid();
        }
        r.meta = meta;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidArgument && cfg.backend != "builtin") throw;
      fail(r, FailureClass::PlanningFailure, e.what());
    }
  }

  // Grasp estimation; pushing needs none.
  std::optional<Pose6D> grasp_pose;
  if (!r.failure && skill != Skill::PushToTarget) {
    try {
      const Affordance3D* target = find_aff(affs, task.target_id);
      if (!target) throw Error(ErrorCode::EmptyCloud, "no target affordance");
      const PointCloud cloud = backproject_cloud(render.depth, &render.color, cam);
      r.grasp = estimate_grasp(cloud, *target, cfg.hgm);
      grasp_pose = r.grasp->chosen.pose;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyCloud && e.code() != ErrorCode::NoCandidates) throw;
      fail(r, FailureClass::GraspFailure, e.what());
    }
  }

  // Execution and judging.
  if (!r.failure) {
    r.exec = execute_trajectory(scene, r.plan, grasp_pose, cfg.exec);
    r.success = check_success(r.exec->final_scene, task);
    if (r.exec->failure) {
      fail(r, *r.exec->failure, r.exec->detail);
    } else if (!r.success) {
      const bool empty = r.exec->has_event(EventKind::EmptyClose) && !r.exec->has_event(EventKind::Attach);
      fail(r, empty ? FailureClass::GraspFailure : FailureClass::TaskFailure,
           empty ? "gripper closed on nothing" : "success condition not met");
    }
    JudgeHints hints;
    hints.task_success = r.success;
    hints.skill = std::string(to_string(skill));
    if (r.meta) hints.goal = r.meta->goal;
    hints.workspace = scene.workspace;
    r.judged = judge_outcome(task.instruction, r.plan, *r.exec, cfg.judge, hints);
  } else {
    r.judged = Outcome::Failure;
  }

  if (bank) {
    ExperienceRecord exp;
    exp.episode_id = std::string(to_string(task.name)) + "-" + std::to_string(cfg.seed) + "-" +
                     std::to_string(bank->size());
    exp.query = task.instruction;
    exp.task = task.name;
    exp.skill = std::string(to_string(skill));
    exp.plan = r.plan;
    exp.outcome = r.judged;
    exp.failure = r.failure;
    exp.transit_clearance = r.meta ? r.meta->transit_clearance : cfg.planner.transit_clearance;
    if (r.grasp) exp.grasp_axis = r.grasp->chosen.pose.orientation * Vec3::UnitY();
    exp.items = knowledge;
    const std::vector<KnowledgeItem> items = construct_knowledge(exp);
    bank->consolidate(items);
    for (const auto& it : items) r.added.push_back(it.id);
  }
  return r;
}

EpisodeResult run_episode(const RunConfig& cfg, KnowledgeBank* bank) {
  auto [scene, task] = spawn_scene(cfg.task, cfg.seed);
  return run_episode(scene, task, cfg, bank);
}

std::string format_episode_report(const EpisodeResult& r) {
  std::string s;
  auto line = [&](const std::string& k, const std::string& v) { s += k + "=" + v + "\n"; };
  line("task", std::string(to_string(r.task)));
  line("seed", std::to_string(r.seed));
  line("preset", r.preset);
  line("success", r.success ? "true" : "false");
  line("judged", std::string(to_string(r.judged)));
  line("failure", r.failure ? std::string(to_string(*r.failure)) : "-");
  line("waypoints", std::to_string(r.plan.waypoint_count()));
  line("steps", std::to_string(r.plan.steps.size()));
  if (r.meta) {
    line("skill", std::string(to_string(r.meta->skill)));
    line("transit_clearance", f3(r.meta->transit_clearance));
    line("transit_z", f3(r.meta->transit_z));
  }
  if (r.grasp) {
    line("grasp_candidates", std::to_string(r.grasp->survived) + "/" + std::to_string(r.grasp->generated));
    line("grasp_width", f3(r.grasp->chosen.width));
  }
  if (r.backend_attempts) line("backend_attempts", std::to_string(r.backend_attempts));
  line("retrieved", std::to_string(r.retrieved.size()));
  line("knowledge_added", std::to_string(r.added.size()));
  line("detail", r.detail.empty() ? "-" : r.detail);
  return s;
}

std::uint64_t episode_seed(std::uint64_t base_seed, int s, int e) {
  return (base_seed + static_cast<std::uint64_t>(s)) * 100000ULL + static_cast<std::uint64_t>(e);
}

std::vector<EvalRow> run_eval(const EvalConfig& cfg) {
  if (cfg.tasks.empty()) throw Error(ErrorCode::InvalidArgument, "no tasks to evaluate");
  if (cfg.episodes < 1 || cfg.seeds < 1) throw Error(ErrorCode::InvalidArgument, "episodes and seeds must be positive");
  const size_t per_task = static_cast<size_t>(cfg.episodes) * static_cast<size_t>(cfg.seeds);
  const size_t total = per_task * cfg.tasks.size();
  std::vector<char> ok(total, 0);
  std::vector<std::string> errors(total);

  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i; (i = next.fetch_add(1)) < total;) {
      const size_t t = i / per_task;
      const int s = static_cast<int>((i % per_task) / static_cast<size_t>(cfg.episodes));
      const int e = static_cast<int>(i % static_cast<size_t>(cfg.episodes));
      RunConfig rc = cfg.base;
      rc.task = cfg.tasks[t];
      rc.seed = episode_seed(cfg.base_seed, s, e);
      try {
        ok[i] = run_episode(rc).success ? 1 : 0;
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  unsigned n = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<size_t>(n, total));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error("episode raised: " + err);
  }

  std::vector<EvalRow> rows;
  for (size_t t = 0; t < cfg.tasks.size(); ++t) {
    EvalRow row;
    row.task = cfg.tasks[t];
    row.preset = cfg.base.preset;
    row.episodes = cfg.episodes;
    row.seeds = cfg.seeds;
    for (int s = 0; s < cfg.seeds; ++s) {
      int wins = 0;
      for (int e = 0; e < cfg.episodes; ++e) wins += ok[t * per_task + static_cast<size_t>(s) * cfg.episodes + e];
      row.seed_rates.push_back(100.0 * wins / cfg.episodes);
    }
    const auto [mean, sd] = success_stats(row.seed_rates);
    row.mean = mean;
    row.std = sd;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_eval_report(const std::vector<EvalRow>& rows) {
  std::string s;
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s\t%s\t%.2f\t%.2f\t%d\t%d\n", std::string(to_string(r.task)).c_str(),
                  r.preset.c_str(), r.mean, r.std, r.episodes, r.seeds);
    s += buf;
  }
  s += "\n";
  std::snprintf(buf, sizeof buf, "%-14s %-20s %16s %9s %6s\n", "task", "preset", "success %", "episodes", "seeds");
  s += buf;
  for (const auto& r : rows) {
    char ms[64];
    std::snprintf(ms, sizeof ms, "%.2f +- %.2f", r.mean, r.std);
    std::snprintf(buf, sizeof buf, "%-14s %-20s %16s %9d %6d\n", std::string(to_string(r.task)).c_str(),
                  r.preset.c_str(), ms, r.episodes, r.seeds);
    s += buf;
  }
  return s;
}

}  // namespace hiertraj
