#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "hiertraj/error.hpp"
#include "hiertraj/protocol.hpp"

namespace hiertraj {

namespace {

std::string f2(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void reject_delimiters(std::string_view s, const char* what) {
  if (s.find(kLeft) != std::string_view::npos || s.find(kRight) != std::string_view::npos) {
    throw Error(ErrorCode::IllegalDelimiter, std::string(what) + " contains an angle-bracket delimiter");
  }
  // ASCII spellings are read as tags too.
  for (std::string_view t : {"<ans>", "</ans>", "<action>", "</action>", "<quest>", "</quest>", "<END>"}) {
    if (s.find(t) != std::string_view::npos) {
      throw Error(ErrorCode::IllegalDelimiter, std::string(what) + " contains the tag " + std::string(t));
    }
  }
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

void check_label(const std::string& label) {
  reject_delimiters(label, "label");
  bool ok = !label.empty() && is_ident_start(label[0]);
  for (char c : label) ok = ok && is_ident(c);
  if (!ok) throw Error(ErrorCode::InvalidArgument, "label '" + label + "' is not a bare identifier");
}

std::string action_tag(GripperAction a) {
  return std::string(kLeft) + "action" + std::string(kRight) + std::string(to_string(a)) + std::string(kLeft) +
         "/action" + std::string(kRight);
}

std::string tag(std::string_view name) { return std::string(kLeft) + std::string(name) + std::string(kRight); }

// Cursor over response text. Accepts the Unicode brackets and their ASCII
// aliases wherever a tag may appear.
class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}

  size_t pos() const { return pos_; }
  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return done() ? '\0' : s_[pos_]; }

  void ws() {
    while (!done() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    ws();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!eat(c)) malformed(std::string("expected '") + c + "'");
  }

  bool eat_literal(std::string_view lit) {
    ws();
    if (s_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }

  bool at_left() const { return s_.substr(pos_, kLeft.size()) == kLeft || peek() == '<'; }

  // Matches a tag such as <action> or </action> at the cursor.
  bool eat_tag(std::string_view name) {
    ws();
    const size_t save = pos_;
    if (!eat_left()) return false;
    if (s_.substr(pos_, name.size()) != name) {
      pos_ = save;
      return false;
    }
    pos_ += name.size();
    if (!eat_right()) {
      pos_ = save;
      return false;
    }
    return true;
  }

  // Raw text up to the next tag `name`, which is consumed.
  std::string until_tag(std::string_view name) {
    for (size_t i = pos_; i < s_.size(); ++i) {
      Reader probe(s_);
      probe.pos_ = i;
      if (probe.eat_tag_here(name)) {
        std::string body(s_.substr(pos_, i - pos_));
        pos_ = probe.pos_;
        return body;
      }
    }
    malformed("unterminated tag");
  }

  double number() {
    ws();
    const size_t start = pos_;
    while (!done() && (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '-' ||
                       peek() == '+' || peek() == 'e' || peek() == 'E')) {
      ++pos_;
    }
    const std::string tok(s_.substr(start, pos_ - start));
    bool digit = false;
    for (char c : tok) digit = digit || std::isdigit(static_cast<unsigned char>(c));
    if (tok.empty() || !digit) {
      pos_ = start;
      malformed("expected a number");
    }
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
      pos_ = start;
      malformed("bad number '" + tok + "'");
    }
    if (v < 0.0 || v > 1.0) throw Error(ErrorCode::RangeViolation, tok + " is outside [0, 1]");
    return v;
  }

  std::vector<double> tuple(size_t arity) {
    const size_t start = pos_;
    expect('(');
    std::vector<double> out;
    out.push_back(number());
    while (eat(',')) out.push_back(number());
    if (!eat(')') || out.size() != arity) {
      pos_ = start;
      malformed("expected a " + std::to_string(arity) + "-tuple");
    }
    return out;
  }

  std::string ident() {
    ws();
    const size_t start = pos_;
    if (!is_ident_start(peek())) malformed("expected a label");
    while (!done() && is_ident(peek())) ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  [[noreturn]] void malformed(const std::string& why) const {
    throw Error(ErrorCode::MalformedTuple, why + " at byte " + std::to_string(pos_));
  }

 private:
  bool eat_left() {
    if (s_.substr(pos_, kLeft.size()) == kLeft) {
      pos_ += kLeft.size();
      return true;
    }
    if (peek() == '<') {
      ++pos_;
      return true;
    }
    return false;
  }

  bool eat_right() {
    if (s_.substr(pos_, kRight.size()) == kRight) {
      pos_ += kRight.size();
      return true;
    }
    if (peek() == '>') {
      ++pos_;
      return true;
    }
    return false;
  }

  bool eat_tag_here(std::string_view name) {
    if (!eat_left()) return false;
    if (s_.substr(pos_, name.size()) != name) return false;
    pos_ += name.size();
    return eat_right();
  }

  std::string_view s_;
  size_t pos_ = 0;
};

// Body of the single answer block.
std::string_view ans_body(std::string_view text) {
  std::vector<std::pair<size_t, size_t>> opens, closes;  // (start, end)
  for (size_t i = 0; i < text.size(); ++i) {
    for (const auto& [left, right] : {std::pair<std::string_view, std::string_view>{kLeft, kRight},
                                      std::pair<std::string_view, std::string_view>{"<", ">"}}) {
      if (text.substr(i, left.size()) != left) continue;
      size_t j = i + left.size();
      const bool closing = j < text.size() && text[j] == '/';
      if (closing) ++j;
      if (text.substr(j, 3) != "ans") continue;
      j += 3;
      for (std::string_view r : {kRight, std::string_view(">")}) {
        if (text.substr(j, r.size()) == r) {
          (closing ? closes : opens).emplace_back(i, j + r.size());
          break;
        }
      }
    }
  }
  if (opens.empty() || closes.empty()) throw Error(ErrorCode::MissingAnsBlock, "no answer block");
  if (opens.size() != 1 || closes.size() != 1) throw Error(ErrorCode::MissingAnsBlock, "more than one answer block");
  if (closes[0].first < opens[0].second) throw Error(ErrorCode::MissingAnsBlock, "answer block closes before it opens");
  return text.substr(opens[0].second, closes[0].first - opens[0].second);
}

// Parses `[ elem, elem, ... ]`, skipping `...` placeholders and a trailing
// comma. `elem` is called with the reader at the element start.
template <typename F>
void parse_list(Reader& r, F&& elem) {
  r.expect('[');
  if (r.eat(']')) return;
  while (true) {
    if (!r.eat_literal("...")) elem();
    if (r.eat(']')) return;
    r.expect(',');
    if (r.eat(']')) return;
  }
}

void expect_end(Reader& r) {
  r.ws();
  if (!r.done()) r.malformed("trailing text after the list");
}

std::vector<std::pair<std::string, std::vector<std::vector<double>>>> parse_entries(std::string_view body,
                                                                                    size_t arity) {
  Reader r(body);
  std::vector<std::pair<std::string, std::vector<std::vector<double>>>> out;
  std::set<std::string> seen;
  parse_list(r, [&] {
    r.expect('[');
    std::string label = r.ident();
    std::vector<std::vector<double>> pts;
    while (r.eat(',')) {
      if (r.eat_literal("...")) continue;
      pts.push_back(r.tuple(arity));
    }
    r.expect(']');
    if (!seen.insert(label).second) throw Error(ErrorCode::DuplicateLabel, "label '" + label + "' repeated");
    out.emplace_back(std::move(label), std::move(pts));
  });
  expect_end(r);
  return out;
}

}  // namespace

double quantize2(double v) { return std::strtod(f2(v).c_str(), nullptr); }

std::string format_asm_prompt(std::string_view instruction) {
  if (instruction.empty()) throw Error(ErrorCode::InvalidArgument, "empty instruction");
  reject_delimiters(instruction, "instruction");
  std::string s;
  s += "In the image, please describe the related object in task described in " + tag("quest") +
       std::string(instruction) + tag("/quest") + ".\n\n";
  s += "Provide a list of points denoting the affordance position of related objects.\n\n";
  s += "Format your answer as a list of tuples enclosed by " + tag("ans") + " and " + tag("/ans") +
       " tags. For example:\n";
  s += tag("ans") + "[[cube,(0.25, 0.21),(0.22, 0.23),(0.23, 0.24)], ...]" + tag("/ans") + "\n\n";
  s += "The tuple denotes the x, y location of the object in the image.\n";
  s += "Each object contains more than 3 points.\n\n";
  s += "The coordinates should be floats ranging between 0 and 1, indicating the relative locations of the points "
       "in the image, with (0,0) at the bottom-left corner.\n";
  return s;
}

std::string format_object_list(const std::vector<Affordance3D>& affs) {
  std::string s = tag("ans") + "[";
  for (size_t i = 0; i < affs.size(); ++i) {
    check_label(affs[i].label);
    if (i) s += ", ";
    s += "[" + affs[i].label;
    for (const auto& p : affs[i].points) {
      for (int k = 0; k < 3; ++k) {
        if (!(p[k] >= 0.0 && p[k] <= 1.0)) {
          throw Error(ErrorCode::RangeViolation, "coordinate " + f2(p[k]) + " of '" + affs[i].label +
                                                     "' is not normalized");
        }
      }
      s += ",(" + f2(p.x()) + ", " + f2(p.y()) + "," + f2(p.z()) + ")";
    }
    s += "]";
  }
  return s + "]" + tag("/ans");
}

std::string format_agent_prompt(std::string_view instruction, const std::vector<Affordance3D>& affs) {
  if (instruction.empty()) throw Error(ErrorCode::InvalidArgument, "empty instruction");
  reject_delimiters(instruction, "instruction");
  std::string s;
  s += "Please execute the command described in " + tag("quest") + std::string(instruction) + tag("/quest") + ".\n\n";
  s += "The coordinates of objects in the scene are\n";
  s += format_object_list(affs) + "\n\n";
  s += "Provide a sequence of points denoting the trajectory of a robot gripper to achieve the goal.\n\n";
  s += "Format your answer as a list of tuples enclosed by " + tag("ans") + " and " + tag("/ans") +
       " tags. For example:\n";
  s += tag("ans") + "[(0.25, 0.32, 0.10), (0.32, 0.17, 0.10), " + action_tag(GripperAction::CloseGripper) +
       ", (0.13, 0.24, 0.10), " + action_tag(GripperAction::OpenGripper) + ", (0.74, 0.21, 0.20), " +
       action_tag(GripperAction::Grasp) + ", ...]" + tag("/ans") + "\n\n";
  s += "The tuple denotes the x, y and z location of the end effector of the gripper in the space. The action tags "
       "indicate the gripper action.\n\n";
  s += "The coordinates should be floats ranging between 0 and 1, indicating the relative locations of the points "
       "in the space.\n";
  s += "The points on the trajectory should not exceed 20.\n";
  return s;
}

std::vector<Affordance3D> normalize_affordances(const std::vector<Affordance3D>& affs, const Aabb3& workspace) {
  std::vector<Affordance3D> out;
  for (const auto& a : affs) {
    Affordance3D n;
    n.label = a.label;
    for (const auto& p : a.points) {
      Vec3 q = normalize_point(p, workspace);
      for (int k = 0; k < 3; ++k) q[k] = std::clamp(q[k], 0.0, 1.0);
      n.points.push_back(q);
    }
    out.push_back(std::move(n));
  }
  return out;
}

std::string format_affordance_answer(const AffordanceSet& aset) {
  std::string s = tag("ans") + "[";
  for (size_t i = 0; i < aset.entries.size(); ++i) {
    const auto& e = aset.entries[i];
    check_label(e.label);
    if (i) s += ", ";
    s += "[" + e.label;
    for (const auto& p : e.points) s += ",(" + f2(p.u) + ", " + f2(p.v) + ")";
    s += "]";
  }
  return s + "]" + tag("/ans");
}

std::string format_trajectory_answer(const TrajectoryPlan& plan) {
  std::string s = tag("ans") + "[";
  for (size_t i = 0; i < plan.steps.size(); ++i) {
    if (i) s += ", ";
    if (const auto* w = std::get_if<Waypoint>(&plan.steps[i])) {
      s += "(" + f2(w->position.x()) + ", " + f2(w->position.y()) + ", " + f2(w->position.z()) + ")";
    } else {
      s += action_tag(std::get<GripperAction>(plan.steps[i]));
    }
  }
  return s + "]" + tag("/ans");
}

AffordanceSet parse_affordance_response(std::string_view text) {
  AffordanceSet out;
  for (auto& [label, pts] : parse_entries(ans_body(text), 2)) {
    AffordanceEntry e;
    e.label = std::move(label);
    for (const auto& p : pts) e.points.push_back(NormPoint2D{p[0], p[1]});
    out.entries.push_back(std::move(e));
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<Vec3>>> parse_object_list(std::string_view text) {
  std::vector<std::pair<std::string, std::vector<Vec3>>> out;
  for (auto& [label, pts] : parse_entries(ans_body(text), 3)) {
    std::vector<Vec3> v;
    for (const auto& p : pts) v.emplace_back(p[0], p[1], p[2]);
    out.emplace_back(std::move(label), std::move(v));
  }
  return out;
}

TrajectoryPlan parse_trajectory_response(std::string_view text) {
  Reader r(ans_body(text));
  TrajectoryPlan plan;
  parse_list(r, [&] {
    if (r.eat_tag("action")) {
      std::string body = r.until_tag("/action");
      const size_t a = body.find_first_not_of(" \t\r\n");
      const size_t b = body.find_last_not_of(" \t\r\n");
      body = a == std::string::npos ? std::string() : body.substr(a, b - a + 1);
      if (body == "Open Gripper") plan.steps.emplace_back(GripperAction::OpenGripper);
      else if (body == "Close Gripper") plan.steps.emplace_back(GripperAction::CloseGripper);
      else if (body == "Grasp") plan.steps.emplace_back(GripperAction::Grasp);
      else throw Error(ErrorCode::UnknownAction, "unknown action '" + body + "'");
      return;
    }
    const std::vector<double> t = r.tuple(3);
    plan.steps.emplace_back(Waypoint{Vec3(t[0], t[1], t[2])});
  });
  expect_end(r);

  const std::vector<PlanViolation> v = validate_plan(plan);
  for (const auto& kind : {PlanViolationKind::Empty, PlanViolationKind::Budget, PlanViolationKind::Range,
                           PlanViolationKind::FirstNotWaypoint, PlanViolationKind::TokenAlternation}) {
    for (const auto& x : v) {
      if (x.kind != kind) continue;
      switch (kind) {
        case PlanViolationKind::Empty: throw Error(ErrorCode::EmptyPlan, x.detail);
        case PlanViolationKind::Budget: throw Error(ErrorCode::BudgetExceeded, x.detail);
        case PlanViolationKind::Range: throw Error(ErrorCode::RangeViolation, x.detail);
        default: throw Error(ErrorCode::TokenAlternation, x.detail);
      }
    }
  }
  return plan;
}

ExchangeConfig parse_backend_spec(std::string_view spec) {
  ExchangeConfig cfg;
  if (spec.rfind("subprocess:", 0) == 0) {
    cfg.kind = ExchangeConfig::Kind::Subprocess;
    cfg.target = std::string(spec.substr(11));
  } else if (spec.rfind("http:", 0) == 0) {
    cfg.kind = ExchangeConfig::Kind::Http;
    cfg.target = std::string(spec.substr(5));
  } else {
    throw Error(ErrorCode::InvalidArgument, "backend must be builtin, subprocess:CMD or http:URL");
  }
  if (cfg.target.empty()) throw Error(ErrorCode::InvalidArgument, "backend target is empty");
  return cfg;
}

Transport make_transport(const ExchangeConfig& cfg) {
  return cfg.kind == ExchangeConfig::Kind::Http ? make_http_transport(cfg.target)
                                                : make_subprocess_transport(cfg.target);
}

ExternalPlan external_plan(const Transport& transport, const std::string& prompt, int retries, double timeout_s) {
  if (retries < 0) throw Error(ErrorCode::InvalidArgument, "retries must be non-negative");
  std::string request = prompt;
  ExternalPlan out;
  for (int attempt = 0;; ++attempt) {
    out.attempts = attempt + 1;
    const std::string reply = transport(request, timeout_s);
    try {
      out.plan = parse_trajectory_response(reply);
      return out;
    } catch (const Error& e) {
      if (attempt >= retries) throw;
      request = prompt + "\nYour previous answer was rejected (" + e.what() + "). Answer again in the same format.\n";
    }
  }
}

ExternalPlan external_plan(const ExchangeConfig& cfg, const std::string& prompt) {
  return external_plan(make_transport(cfg), prompt, cfg.retries, cfg.timeout_s);
}

}  // namespace hiertraj
