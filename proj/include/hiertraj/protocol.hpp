#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hiertraj/perception.hpp"
#include "hiertraj/plan.hpp"
#include "hiertraj/planner.hpp"

namespace hiertraj {

inline constexpr std::string_view kLeft = "⟨";   // ⟨
inline constexpr std::string_view kRight = "⟩";  // ⟩

std::string format_asm_prompt(std::string_view instruction);

// `affs` must already be in workspace-normalized coordinates.
std::string format_agent_prompt(std::string_view instruction, const std::vector<Affordance3D>& affs);

// Copies of `affs` with every point mapped into [0,1]^3 of `workspace`.
std::vector<Affordance3D> normalize_affordances(const std::vector<Affordance3D>& affs, const Aabb3& workspace);

// Answer-side serializers with two-decimal fixed output.
std::string format_affordance_answer(const AffordanceSet& aset);
std::string format_trajectory_answer(const TrajectoryPlan& plan);
std::string format_object_list(const std::vector<Affordance3D>& affs);

AffordanceSet parse_affordance_response(std::string_view text);
TrajectoryPlan parse_trajectory_response(std::string_view text);
std::vector<std::pair<std::string, std::vector<Vec3>>> parse_object_list(std::string_view text);

// Rounds to the two decimals the serializers emit.
double quantize2(double v);

struct ExchangeConfig {
  enum class Kind { Subprocess, Http };
  Kind kind = Kind::Subprocess;
  std::string target;  // shell command or base URL
  double timeout_s = 60.0;
  int retries = 2;
};

// "subprocess:CMD" or "http:URL".
ExchangeConfig parse_backend_spec(std::string_view spec);

// One request/response round; throws Timeout or BackendUnavailable.
using Transport = std::function<std::string(const std::string& prompt, double timeout_s)>;

Transport make_transport(const ExchangeConfig& cfg);
Transport make_subprocess_transport(const std::string& command);
Transport make_http_transport(const std::string& url);

struct ExternalPlan {
  TrajectoryPlan plan;
  int attempts = 0;
};

// Sends the prompt and parses the reply. A reply that fails to parse is
// retried with a correction line naming the error, at most `retries` times.
ExternalPlan external_plan(const Transport& transport, const std::string& prompt, int retries, double timeout_s);
ExternalPlan external_plan(const ExchangeConfig& cfg, const std::string& prompt);

}  // namespace hiertraj
