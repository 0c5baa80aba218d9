#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "hiertraj/error.hpp"
#include "hiertraj/hash.hpp"
#include "hiertraj/knowledge.hpp"

namespace hiertraj {

Embedding embed_text(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));

  Embedding e{};
  for (size_t i = 0; i < words.size(); ++i) {
    e[fnv1a64(words[i]) % kEmbeddingDim] += 1.0;
    if (i + 1 < words.size()) e[fnv1a64(words[i] + " " + words[i + 1]) % kEmbeddingDim] += 1.0;
  }
  double n2 = 0.0;
  for (double v : e) n2 += v * v;
  if (n2 > 0.0) {
    const double inv = 1.0 / std::sqrt(n2);
    for (double& v : e) v *= inv;
  }
  return e;
}

double dot(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (int i = 0; i < kEmbeddingDim; ++i) s += a[i] * b[i];
  return s;
}

std::string_view to_string(KnowledgeKind k) {
  switch (k) {
    case KnowledgeKind::Strategy: return "Strategy";
    case KnowledgeKind::Pitfall: return "Pitfall";
    case KnowledgeKind::Guardrail: return "Guardrail";
  }
  return "?";
}

KnowledgeKind knowledge_kind_from_string(std::string_view s) {
  if (s == "Strategy") return KnowledgeKind::Strategy;
  if (s == "Pitfall") return KnowledgeKind::Pitfall;
  if (s == "Guardrail") return KnowledgeKind::Guardrail;
  throw Error(ErrorCode::BankFormat, "unknown knowledge kind '" + std::string(s) + "'");
}

std::string_view to_string(Outcome o) { return o == Outcome::Success ? "Success" : "Failure"; }

Outcome outcome_from_string(std::string_view s) {
  if (s == "Success") return Outcome::Success;
  if (s == "Failure") return Outcome::Failure;
  throw Error(ErrorCode::InvalidArgument, "unknown outcome '" + std::string(s) + "'");
}

KnowledgeItem make_item(std::string id, KnowledgeKind kind, std::string text, Outcome outcome,
                        std::optional<std::string> key, std::optional<double> value) {
  if (kind == KnowledgeKind::Guardrail && (!key || !value)) {
    throw Error(ErrorCode::InvalidArgument, "a guardrail needs a key and a value");
  }
  KnowledgeItem it;
  it.id = std::move(id);
  it.kind = kind;
  it.text = std::move(text);
  it.key = std::move(key);
  it.value = value;
  it.source_outcome = outcome;
  it.embedding = embed_text(it.text);
  return it;
}

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string axis_text(const Vec3& a) {
  return "(" + fixed2(a.x()) + "," + fixed2(a.y()) + "," + fixed2(a.z()) + ")";
}

}  // namespace

std::vector<KnowledgeItem> construct_knowledge(const ExperienceRecord& exp) {
  const std::string task(to_string(exp.task));
  const std::string head = "task=" + task + " skill=" + exp.skill + " ";
  const std::string prefix = exp.episode_id + "/";
  std::vector<KnowledgeItem> items;
  auto id = [&] { return prefix + std::to_string(items.size()); };

  if (exp.outcome == Outcome::Success) {
    const int stages = std::max(1, exp.plan.stage_count());
    for (int s = 1; s <= stages; ++s) {
      items.push_back(make_item(id(), KnowledgeKind::Strategy,
                                head + "stage=" + std::to_string(s) + "/" + std::to_string(stages) +
                                    " approach=top clearance=" + fixed2(exp.transit_clearance) + " succeeded for " +
                                    exp.query,
                                Outcome::Success));
    }
    return items;
  }
  const FailureClass f = exp.failure.value_or(FailureClass::TaskFailure);
  switch (f) {
    case FailureClass::PlanningFailure: {
      const double raised = exp.transit_clearance * 1.5;
      items.push_back(make_item(id(), KnowledgeKind::Pitfall,
                                head + "collided at clearance=" + fixed2(exp.transit_clearance) + " while trying to " +
                                    exp.query,
                                Outcome::Failure));
      items.push_back(make_item(id(), KnowledgeKind::Guardrail,
                                head + "keep transit_clearance at least " + fixed2(raised) + " to " + exp.query,
                                Outcome::Failure, std::string("transit_clearance"), raised));
      break;
    }
    case FailureClass::GraspFailure:
      items.push_back(make_item(id(), KnowledgeKind::Pitfall,
                                head + "grasp closing along axis " + axis_text(exp.grasp_axis) + " failed to " +
                                    exp.query,
                                Outcome::Failure));
      break;
    default:
      items.push_back(make_item(id(), KnowledgeKind::Pitfall,
                                head + std::string(to_string(f)) + " while trying to " + exp.query, Outcome::Failure));
      break;
  }
  return items;
}

KnowledgeBank::KnowledgeBank(const KnowledgeBank& other) {
  std::shared_lock lock(other.mutex_);
  items_ = other.items_;
  index_ = other.index_;
}

KnowledgeBank& KnowledgeBank::operator=(const KnowledgeBank& other) {
  if (this == &other) return *this;
  std::vector<KnowledgeItem> items;
  std::vector<double> index;
  {
    std::shared_lock lock(other.mutex_);
    items = other.items_;
    index = other.index_;
  }
  std::unique_lock lock(mutex_);
  items_ = std::move(items);
  index_ = std::move(index);
  return *this;
}

void KnowledgeBank::consolidate(const std::vector<KnowledgeItem>& items) {
  std::unique_lock lock(mutex_);
  std::set<std::string> ids;
  for (const auto& it : items_) ids.insert(it.id);
  for (const auto& it : items) {
    if (!ids.insert(it.id).second) throw Error(ErrorCode::DuplicateId, "item id '" + it.id + "' already present");
  }
  for (const auto& it : items) {
    items_.push_back(it);
    index_.insert(index_.end(), it.embedding.begin(), it.embedding.end());
  }
}

std::vector<Retrieved> KnowledgeBank::retrieve(std::string_view query, size_t k) const {
  return retrieve(embed_text(query), k);
}

std::vector<Retrieved> KnowledgeBank::retrieve(const Embedding& q, size_t k) const {
  std::shared_lock lock(mutex_);
  const size_t n = items_.size();
  std::vector<double> sim(n);
  for (size_t i = 0; i < n; ++i) {
    const double* row = index_.data() + i * kEmbeddingDim;
    double s = 0.0;
    for (int d = 0; d < kEmbeddingDim; ++d) s += q[d] * row[d];
    sim[i] = s;
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](size_t a, size_t b) { return sim[a] > sim[b] || (sim[a] == sim[b] && a < b); });
  std::vector<Retrieved> out;
  for (size_t i = 0; i < take; ++i) out.push_back({items_[order[i]], sim[order[i]]});
  return out;
}

std::vector<KnowledgeItem> KnowledgeBank::items() const {
  std::shared_lock lock(mutex_);
  return items_;
}

size_t KnowledgeBank::size() const {
  std::shared_lock lock(mutex_);
  return items_.size();
}

void KnowledgeBank::clear() {
  std::unique_lock lock(mutex_);
  items_.clear();
  index_.clear();
}

namespace {

constexpr const char* kBankHeader = "hiertraj-bank v1";

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out.push_back(c);
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    const char n = s[++i];
    out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n);
  }
  return out;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, size_t line_no) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BankFormat, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
}

}  // namespace

void KnowledgeBank::save(const std::string& path) const {
  const std::vector<KnowledgeItem> snapshot = items();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write bank '" + path + "'");
    out << kBankHeader << "\n";
    for (const auto& it : snapshot) {
      out << escape(it.id) << '\t' << to_string(it.kind) << '\t' << (it.key ? escape(*it.key) : "-") << '\t'
          << (it.value ? g17(*it.value) : "-") << '\t' << to_string(it.source_outcome) << '\t' << escape(it.text);
      for (double v : it.embedding) out << '\t' << g17(v);
      out << '\n';
    }
    if (!out) throw Error(ErrorCode::Io, "failed writing bank '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error(ErrorCode::Io, "cannot publish bank '" + path + "'");
}

KnowledgeBank KnowledgeBank::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open bank '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kBankHeader) {
    throw Error(ErrorCode::BankFormat, "missing header '" + std::string(kBankHeader) + "'");
  }
  std::vector<KnowledgeItem> items;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_tabs(line);
    if (f.size() != 6 + kEmbeddingDim) {
      throw Error(ErrorCode::BankFormat, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(6 + kEmbeddingDim) + " fields");
    }
    KnowledgeItem it;
    it.id = unescape(f[0]);
    it.kind = knowledge_kind_from_string(f[1]);
    if (f[2] != "-") it.key = unescape(f[2]);
    if (f[3] != "-") it.value = parse_double(f[3], line_no);
    try {
      it.source_outcome = outcome_from_string(f[4]);
    } catch (const Error&) {
      throw Error(ErrorCode::BankFormat, "line " + std::to_string(line_no) + ": bad outcome");
    }
    it.text = unescape(f[5]);
    for (int d = 0; d < kEmbeddingDim; ++d) it.embedding[d] = parse_double(f[6 + d], line_no);
    if (it.kind == KnowledgeKind::Guardrail && (!it.key || !it.value)) {
      throw Error(ErrorCode::BankFormat, "line " + std::to_string(line_no) + ": guardrail without key/value");
    }
    items.push_back(std::move(it));
  }
  KnowledgeBank bank;
  try {
    bank.consolidate(items);
  } catch (const Error& e) {
    throw Error(ErrorCode::BankFormat, e.what());
  }
  return bank;
}

std::string_view to_string(JudgeMode m) { return m == JudgeMode::Oracle ? "oracle" : "heuristic"; }

JudgeMode judge_mode_from_string(std::string_view s) {
  if (s == "oracle") return JudgeMode::Oracle;
  if (s == "heuristic") return JudgeMode::Heuristic;
  throw Error(ErrorCode::InvalidArgument, "unknown judge mode '" + std::string(s) + "'");
}

Outcome judge_outcome(std::string_view query, const TrajectoryPlan& plan, const ExecutionResult& result,
                      JudgeMode mode, const JudgeHints& hints) {
  if (mode == JudgeMode::Oracle) return hints.task_success ? Outcome::Success : Outcome::Failure;
  if (result.failure || plan.steps.empty()) return Outcome::Failure;

  std::string skill = hints.skill;
  if (skill.empty()) {
    std::string q;
    for (char c : query) q.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    skill = q.find("push") != std::string::npos ? "PushToTarget" : "PickPlace";
  }
  std::optional<GripperAction> last_action;
  std::optional<Vec3> last_wp;
  for (const auto& s : plan.steps) {
    if (const auto* a = std::get_if<GripperAction>(&s)) last_action = *a;
    else last_wp = std::get<Waypoint>(s).position;
  }

  if (skill == "PushToTarget") {
    if (!hints.goal || !last_wp || !result.has_event(EventKind::PushContact)) return Outcome::Failure;
    const Point3D end = denormalize_point(*last_wp, hints.workspace);
    const double d = std::hypot(end.x() - hints.goal->x(), end.y() - hints.goal->y());
    return d <= hints.goal_radius ? Outcome::Success : Outcome::Failure;
  }
  if (!result.has_event(EventKind::Attach)) return Outcome::Failure;
  if (skill == "PickPlace") {
    return last_action == GripperAction::OpenGripper ? Outcome::Success : Outcome::Failure;
  }
  // Holding skills end closed with the object still in hand.
  const bool closed = last_action && is_closing(*last_action);
  return closed && result.final_scene.held ? Outcome::Success : Outcome::Failure;
}

}  // namespace hiertraj
