#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "hiertraj/datagen.hpp"
#include "hiertraj/error.hpp"
#include "hiertraj/knowledge.hpp"
#include "hiertraj/pipeline.hpp"
#include "hiertraj/world.hpp"

using namespace hiertraj;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInvalid = 2;

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::string task;
  std::string scene;
  std::optional<std::uint64_t> seed;
  double noise_px = 0.0;
  int points_per_object = 3;
  std::string preset = "default";
  std::string backend = "builtin";
  std::string bank;
  std::string judge = "oracle";
  double timeout_s = 60.0;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("HIERTRAJ_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0') throw Usage("HIERTRAJ_SEED is not an unsigned integer");
    return v;
  }
  return 0;
}

std::string preset_help() {
  std::string s = "ablation preset:";
  for (const auto& p : preset_names()) s += " " + p;
  return s;
}

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--seed", f.seed, "episode seed (falls back to HIERTRAJ_SEED, then 0)");
  cmd->add_option("--noise-px", f.noise_px, "affordance point noise, pixels")->check(CLI::NonNegativeNumber);
  cmd->add_option("--points-per-object", f.points_per_object, "affordance points per object")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--preset", f.preset, preset_help());
  cmd->add_option("--backend", f.backend, "builtin | subprocess:CMD | http:URL");
  cmd->add_option("--judge", f.judge, "oracle | heuristic");
  cmd->add_option("--timeout", f.timeout_s, "external backend timeout, seconds")->check(CLI::PositiveNumber);
}

RunConfig make_config(const RunFlags& f) {
  RunConfig cfg;
  cfg.seed = resolve_seed(f.seed);
  cfg.perception.noise_px = f.noise_px;
  cfg.perception.points_per_object = f.points_per_object;
  cfg.backend = f.backend;
  cfg.backend_timeout_s = f.timeout_s;
  cfg.judge = judge_mode_from_string(f.judge);
  if (f.backend != "builtin") parse_backend_spec(f.backend);
  return apply_preset(cfg, f.preset);
}

int cmd_run(const RunFlags& f) {
  RunConfig cfg = make_config(f);
  Scene scene;
  TaskSpec task;
  if (!f.scene.empty()) {
    SceneFile sf = load_scene_file(f.scene);
    scene = std::move(sf.scene);
    task = std::move(sf.task);
    if (!f.task.empty() && task_from_string(f.task) != task.name) throw Usage("--task disagrees with the scene file");
  } else {
    if (f.task.empty()) throw Usage("--task or --scene is required");
    cfg.task = task_from_string(f.task);
    std::tie(scene, task) = spawn_scene(cfg.task, cfg.seed);
  }
  cfg.task = task.name;

  std::optional<KnowledgeBank> bank;
  if (!f.bank.empty()) bank = std::filesystem::exists(f.bank) ? KnowledgeBank::load(f.bank) : KnowledgeBank();
  const EpisodeResult r = run_episode(scene, task, cfg, bank ? &*bank : nullptr);
  if (bank) bank->save(f.bank);
  std::cout << format_episode_report(r);
  return r.success ? kOk : kFailed;
}

int cmd_demo_gen(const std::string& task_name, int count, const std::optional<std::uint64_t>& seed_flag,
                 const std::string& out, bool include_failures) {
  const TaskName task = task_from_string(task_name);
  if (count < 0) throw Usage("--count must be non-negative");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw Usage("cannot create " + out + ": " + ec.message());
  {
    const auto probe = std::filesystem::path(out) / ".write-probe";
    std::ofstream p(probe);
    if (!p) throw Usage("output directory " + out + " is not writable");
    p.close();
    std::filesystem::remove(probe, ec);
  }
  RunConfig cfg;
  cfg.task = task;
  const std::uint64_t base = resolve_seed(seed_flag);
  Dataset ds;
  int successes = 0, attempts = 0;
  const int cap = 10 * count;
  while (successes < count && attempts < cap) {
    cfg.seed = base + static_cast<std::uint64_t>(attempts++);
    auto [scene, spec] = spawn_scene(task, cfg.seed);
    const EpisodeResult r = run_episode(scene, spec, cfg);
    if (r.success) ++successes;
    ds.demos.push_back(record_episode(r, scene, spec, cfg.exec));
  }
  const Dataset kept = include_failures ? ds : filter_successes(ds);
  export_dataset(kept, out);
  std::printf("task=%s successes=%d attempts=%d exported=%zu\n", std::string(to_string(task)).c_str(), successes,
              attempts, kept.demos.size());
  if (successes < count) {
    std::fprintf(stderr, "attempt cap %d reached with %d of %d successes\n", cap, successes, count);
    return kFailed;
  }
  return kOk;
}

int cmd_eval(std::vector<std::string> tasks, int episodes, int seeds, const std::optional<std::uint64_t>& seed_flag,
             std::vector<std::string> presets, const std::string& report, unsigned workers, double noise_px,
             int points_per_object) {
  if (tasks.empty() || (tasks.size() == 1 && tasks[0] == "all")) {
    tasks.clear();
    for (TaskName t : kAllTasks) tasks.emplace_back(to_string(t));
  }
  if (presets.empty()) presets.push_back("default");
  if (episodes < 1 || seeds < 1) throw Usage("--episodes and --seeds must be positive");
  std::vector<EvalRow> rows;
  std::vector<RunConfig> bases;
  for (const auto& p : presets) {
    RunConfig base;
    base.perception.noise_px = noise_px;
    base.perception.points_per_object = points_per_object;
    bases.push_back(apply_preset(base, p));
  }
  EvalConfig ec;
  for (const auto& t : tasks) ec.tasks.push_back(task_from_string(t));
  ec.episodes = episodes;
  ec.seeds = seeds;
  ec.base_seed = resolve_seed(seed_flag);
  ec.workers = workers;
  for (const auto& b : bases) {
    ec.base = b;
    for (auto& row : run_eval(ec)) rows.push_back(std::move(row));
  }
  const std::string text = format_eval_report(rows);
  std::cout << text;
  if (!report.empty()) {
    std::ofstream out(report, std::ios::binary | std::ios::trunc);
    if (!out) throw Usage("cannot write report " + report);
    out << text;
  }
  return kOk;
}

int cmd_bank_show(const std::string& path, const std::string& query, size_t top) {
  if (!std::filesystem::exists(path)) throw Usage("no bank at " + path);
  const KnowledgeBank bank = KnowledgeBank::load(path);
  const auto items = bank.items();
  std::map<KnowledgeKind, size_t> by_kind;
  for (const auto& it : items) ++by_kind[it.kind];
  std::printf("%zu items\n", items.size());
  for (KnowledgeKind k : {KnowledgeKind::Strategy, KnowledgeKind::Pitfall, KnowledgeKind::Guardrail}) {
    std::printf("  %s: %zu\n", std::string(to_string(k)).c_str(), by_kind[k]);
  }
  if (!query.empty()) {
    for (const auto& hit : bank.retrieve(query, top)) {
      std::printf("%.4f\t%s\t%s\n", hit.similarity, hit.item.id.c_str(), hit.item.text.c_str());
    }
  }
  return kOk;
}

int cmd_bank_clear(const std::string& path, bool yes) {
  if (!std::filesystem::exists(path)) throw Usage("no bank at " + path);
  if (!yes) throw Usage("refusing to clear " + path + " without --yes");
  KnowledgeBank::load(path);
  KnowledgeBank().save(path);
  std::printf("cleared %s\n", path.c_str());
  return kOk;
}

int cmd_replay(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Usage("no demonstration at " + path);
  const Demonstration demo = load_demonstration(path);
  Scene scene;
  TaskSpec task;
  if (!demo.scene.empty()) {
    SceneFile sf = load_scene_file(demo.scene);
    scene = std::move(sf.scene);
    task = std::move(sf.task);
  } else {
    std::tie(scene, task) = spawn_scene(demo.task, demo.seed);
  }
  const bool ok = replay_demonstration(demo, scene, task);
  const bool recorded = demo.outcome == Outcome::Success;
  std::printf("task=%s seed=%llu recorded=%s replayed=%s\n", std::string(to_string(demo.task)).c_str(),
              static_cast<unsigned long long>(demo.seed), recorded ? "success" : "failure",
              ok ? "success" : "failure");
  return ok == recorded ? kOk : kFailed;
}

bool usage_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownTask:
    case ErrorCode::SceneFormat:
    case ErrorCode::Io:
    case ErrorCode::BankFormat:
    case ErrorCode::SchemaVersionMismatch:
    case ErrorCode::CorruptFrame:
    case ErrorCode::PlacementExhausted:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical trajectory pipeline for desk-scale manipulation"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "run one episode and print its report");
  run->add_option("--task", rf.task, "task name");
  run->add_option("--scene", rf.scene, "scene file to run instead of a spawned scene");
  run->add_option("--bank", rf.bank, "knowledge bank file, created when missing");
  add_run_flags(run, rf);

  std::string dg_task, dg_out;
  int dg_count = 10;
  std::optional<std::uint64_t> dg_seed;
  bool dg_failures = false;
  auto* dg = app.add_subcommand("demo-gen", "record successful demonstrations and export them");
  dg->add_option("--task", dg_task, "task name")->required();
  dg->add_option("--count", dg_count, "successes to collect");
  dg->add_option("--seed", dg_seed, "first seed (falls back to HIERTRAJ_SEED, then 0)");
  dg->add_option("--out", dg_out, "output directory")->required();
  dg->add_flag("--include-failures", dg_failures, "export failed episodes too");

  std::vector<std::string> ev_tasks, ev_presets;
  int ev_episodes = 50, ev_seeds = 3, ev_ppo = 3;
  std::optional<std::uint64_t> ev_seed;
  std::string ev_report;
  unsigned ev_workers = 0;
  double ev_noise = 0.0;
  auto* ev = app.add_subcommand("eval", "evaluate success rates over seeded episodes");
  ev->add_option("--task", ev_tasks, "task names, repeatable; 'all' or none for every task");
  ev->add_option("--episodes", ev_episodes, "episodes per seed");
  ev->add_option("--seeds", ev_seeds, "seed groups");
  ev->add_option("--seed", ev_seed, "base seed (falls back to HIERTRAJ_SEED, then 0)");
  ev->add_option("--preset", ev_presets, preset_help() + "; repeatable");
  ev->add_option("--report", ev_report, "write the report here as well");
  ev->add_option("--workers", ev_workers, "worker threads, 0 = available parallelism");
  ev->add_option("--noise-px", ev_noise, "affordance point noise, pixels")->check(CLI::NonNegativeNumber);
  ev->add_option("--points-per-object", ev_ppo, "affordance points per object")->check(CLI::PositiveNumber);

  std::string bank_path, bank_query;
  size_t bank_top = 5;
  bool bank_yes = false;
  auto* bank = app.add_subcommand("bank", "inspect or clear a knowledge bank");
  bank->require_subcommand(1);
  auto* show = bank->add_subcommand("show", "print item counts and the top items for a query");
  show->add_option("--bank", bank_path, "bank file")->required();
  show->add_option("--query", bank_query, "query text");
  show->add_option("--top", bank_top, "items to list for the query");
  auto* clear = bank->add_subcommand("clear", "remove every item");
  clear->add_option("--bank", bank_path, "bank file")->required();
  clear->add_flag("--yes", bank_yes, "confirm");

  std::string demo_path;
  auto* replay = app.add_subcommand("replay", "re-execute a recorded demonstration");
  replay->add_option("--demo", demo_path, "demonstration record file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*run) return cmd_run(rf);
    if (*dg) return cmd_demo_gen(dg_task, dg_count, dg_seed, dg_out, dg_failures);
    if (*ev) {
      return cmd_eval(ev_tasks, ev_episodes, ev_seeds, ev_seed, ev_presets, ev_report, ev_workers, ev_noise, ev_ppo);
    }
    if (*show) return cmd_bank_show(bank_path, bank_query, bank_top);
    if (*clear) return cmd_bank_clear(bank_path, bank_yes);
    if (*replay) return cmd_replay(demo_path);
  } catch (const Usage& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return usage_code(e.code()) ? kInvalid : kFailed;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kInvalid;
}
