#pragma once

#include <array>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hiertraj/plan.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

inline constexpr int kEmbeddingDim = 256;

// Unit length, or all zero for text without tokens.
using Embedding = std::array<double, kEmbeddingDim>;

// Lowercased alphanumeric word unigrams and bigrams, FNV-1a hashed into
// 256 buckets, L2 normalized.
Embedding embed_text(std::string_view text);
double dot(const Embedding& a, const Embedding& b);

enum class KnowledgeKind { Strategy, Pitfall, Guardrail };
enum class Outcome { Success, Failure };

std::string_view to_string(KnowledgeKind k);
KnowledgeKind knowledge_kind_from_string(std::string_view s);
std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct KnowledgeItem {
  std::string id;
  KnowledgeKind kind = KnowledgeKind::Strategy;
  std::string text;
  std::optional<std::string> key;
  std::optional<double> value;
  Outcome source_outcome = Outcome::Success;
  Embedding embedding{};

  bool operator==(const KnowledgeItem&) const = default;
};

KnowledgeItem make_item(std::string id, KnowledgeKind kind, std::string text, Outcome outcome,
                        std::optional<std::string> key = std::nullopt, std::optional<double> value = std::nullopt);

struct ExperienceRecord {
  std::string episode_id;  // prefix for item ids
  std::string query;
  TaskName task = TaskName::PutBlock;
  std::string skill;
  TrajectoryPlan plan;
  Outcome outcome = Outcome::Success;
  std::optional<FailureClass> failure;
  double transit_clearance = 0.10;
  Vec3 grasp_axis = Vec3::UnitY();
  std::vector<KnowledgeItem> items;
};

std::vector<KnowledgeItem> construct_knowledge(const ExperienceRecord& exp);

struct Retrieved {
  KnowledgeItem item;
  double similarity = 0.0;
};

// Append-only store. Readers share; a consolidation holds the writer lock for
// the whole batch so readers see the bank before or after it, never between.
class KnowledgeBank {
 public:
  KnowledgeBank() = default;
  KnowledgeBank(const KnowledgeBank& other);
  KnowledgeBank& operator=(const KnowledgeBank& other);

  // Rejects the whole batch with DuplicateId if any id is already present or
  // repeated within the batch.
  void consolidate(const std::vector<KnowledgeItem>& items);

  // Top-k by cosine similarity, ties to the older item.
  std::vector<Retrieved> retrieve(std::string_view query, size_t k) const;
  std::vector<Retrieved> retrieve(const Embedding& query, size_t k) const;

  std::vector<KnowledgeItem> items() const;
  size_t size() const;
  void clear();

  void save(const std::string& path) const;
  static KnowledgeBank load(const std::string& path);

 private:
  mutable std::shared_mutex mutex_;
  std::vector<KnowledgeItem> items_;
  std::vector<double> index_;  // row-major embeddings
};

enum class JudgeMode { Oracle, Heuristic };

std::string_view to_string(JudgeMode m);
JudgeMode judge_mode_from_string(std::string_view s);

// What the judge may look at besides the plan and the execution trace. The
// heuristic mode never reads `task_success`.
struct JudgeHints {
  bool task_success = false;
  std::string skill;                   // planner skill name, empty when unknown
  std::optional<Point3D> goal;         // perceived goal center, meters
  double goal_radius = 0.05;
  Aabb3 workspace = default_workspace();
};

Outcome judge_outcome(std::string_view query, const TrajectoryPlan& plan, const ExecutionResult& result,
                      JudgeMode mode, const JudgeHints& hints = {});

}  // namespace hiertraj
