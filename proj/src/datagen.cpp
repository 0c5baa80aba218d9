#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hiertraj/datagen.hpp"
#include "hiertraj/error.hpp"

namespace hiertraj {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader = "hiertraj-dataset v1";
constexpr const char* kManifestName = "manifest.txt";

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out += c;
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    const char n = s[++i];
    out += n == 't' ? '\t' : n == 'n' ? '\n' : n;
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

[[noreturn]] void corrupt(const std::string& where, const std::string& why) {
  throw Error(ErrorCode::CorruptFrame, where + ": " + why);
}

double to_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) corrupt(where, "bad number '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& where) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) corrupt(where, "bad integer '" + s + "'");
  return v;
}

std::string demo_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "demo_%05zu", i);
  return buf;
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + p.string());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string depth_bytes(const DepthImage& d) {
  std::string out(d.depth.size() * 4, '\0');
  for (size_t i = 0; i < d.depth.size(); ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &d.depth[i], 4);
    for (int b = 0; b < 4; ++b) out[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return out;
}

DepthImage depth_from_bytes(const std::string& data, int w, int h, const std::string& where) {
  const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
  if (data.size() != n * 4) {
    corrupt(where, "expected " + std::to_string(n * 4) + " bytes, found " + std::to_string(data.size()));
  }
  DepthImage d(w, h);
  for (size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[i * 4 + b])) << (8 * b);
    std::memcpy(&d.depth[i], &bits, 4);
  }
  return d;
}

std::string serialize_demo(const Demonstration& d, const std::string& stem, std::vector<std::pair<std::string, std::string>>& blobs) {
  std::string thresholds;
  for (const auto& [k, v] : d.thresholds) {
    if (!thresholds.empty()) thresholds += ",";
    thresholds += k + ":" + g17(v);
  }
  std::string depth_size = "-";
  for (const auto& f : d.frames) {
    if (f.depth) {
      depth_size = std::to_string(f.depth->width) + "x" + std::to_string(f.depth->height);
      break;
    }
  }
  std::string s = "instruction=" + escape(d.instruction) + "\tseed=" + std::to_string(d.seed) +
                  "\ttask=" + std::string(to_string(d.task)) + "\tscene=" + (d.scene.empty() ? "-" : escape(d.scene)) +
                  "\toutcome=" + std::string(to_string(d.outcome)) +
                  "\tfailure=" + (d.failure ? std::string(to_string(*d.failure)) : "-") +
                  "\tthresholds=" + (thresholds.empty() ? "-" : thresholds) + "\tdepth_size=" + depth_size + "\n";
  for (const auto& f : d.frames) {
    const auto& p = f.pose.position;
    const auto& q = f.pose.orientation;
    std::string depth = "-";
    if (f.depth) {
      if (depth_size != std::to_string(f.depth->width) + "x" + std::to_string(f.depth->height)) {
        throw Error(ErrorCode::InvalidArgument, "depth frames of one demonstration must share a size");
      }
      char buf[48];
      std::snprintf(buf, sizeof buf, "_f%04d.depth", f.index);
      depth = stem + buf;
      blobs.emplace_back(depth, depth_bytes(*f.depth));
    }
    s += std::to_string(f.index) + " " + g17(p.x()) + " " + g17(p.y()) + " " + g17(p.z()) + " " + g17(q.w()) + " " +
         g17(q.x()) + " " + g17(q.y()) + " " + g17(q.z()) + " " + (f.jaw == Jaw::Open ? "open" : "closed") + " " +
         depth + "\n";
  }
  return s;
}

Demonstration parse_demo(const std::string& text, const fs::path& dir, const std::string& where) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) corrupt(where, "empty record");
  Demonstration d;
  std::map<std::string, std::string> h;
  for (const auto& field : split(line, '\t')) {
    const size_t eq = field.find('=');
    if (eq == std::string::npos) corrupt(where, "header field without '='");
    h[field.substr(0, eq)] = field.substr(eq + 1);
  }
  for (const char* key : {"instruction", "seed", "task", "scene", "outcome", "failure", "thresholds", "depth_size"}) {
    if (!h.count(key)) corrupt(where, std::string("header lacks ") + key);
  }
  try {
    d.instruction = unescape(h["instruction"]);
    d.seed = to_u64(h["seed"], where);
    d.task = task_from_string(h["task"]);
    d.scene = h["scene"] == "-" ? "" : unescape(h["scene"]);
    d.outcome = outcome_from_string(h["outcome"]);
    if (h["failure"] != "-") {
      d.failure = failure_from_string(h["failure"]);
      if (!d.failure) corrupt(where, "unknown failure class '" + h["failure"] + "'");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptFrame) throw;
    corrupt(where, e.what());
  }
  if (h["thresholds"] != "-") {
    for (const auto& kv : split(h["thresholds"], ',')) {
      const size_t c = kv.find(':');
      if (c == std::string::npos) corrupt(where, "bad threshold '" + kv + "'");
      d.thresholds[kv.substr(0, c)] = to_double(kv.substr(c + 1), where);
    }
  }
  int w = 0, hgt = 0;
  if (h["depth_size"] != "-") {
    const size_t x = h["depth_size"].find('x');
    if (x == std::string::npos) corrupt(where, "bad depth_size");
    w = static_cast<int>(to_u64(h["depth_size"].substr(0, x), where));
    hgt = static_cast<int>(to_u64(h["depth_size"].substr(x + 1), where));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t = split(line, ' ');
    if (t.size() != 10) corrupt(where, "frame line with " + std::to_string(t.size()) + " fields");
    Frame f;
    f.index = static_cast<int>(to_u64(t[0], where));
    f.pose.position = Point3D(to_double(t[1], where), to_double(t[2], where), to_double(t[3], where));
    f.pose.orientation =
        Eigen::Quaterniond(to_double(t[4], where), to_double(t[5], where), to_double(t[6], where), to_double(t[7], where));
    if (t[8] == "open") f.jaw = Jaw::Open;
    else if (t[8] == "closed") f.jaw = Jaw::Closed;
    else corrupt(where, "bad jaw state '" + t[8] + "'");
    if (t[9] != "-") {
      if (w <= 0 || hgt <= 0) corrupt(where, "depth frame without depth_size");
      if (t[9].find('/') != std::string::npos) corrupt(where, "depth path must be a bare file name");
      f.depth = depth_from_bytes(read_file(dir / t[9]), w, hgt, t[9]);
    }
    d.frames.push_back(std::move(f));
  }
  return d;
}

}  // namespace

ManifestCounts Dataset::manifest() const {
  ManifestCounts m;
  for (const auto& d : demos) {
    auto& c = m.per_task[d.task];
    (d.outcome == Outcome::Success ? c.first : c.second) += 1;
    ++m.total;
  }
  return m;
}

Demonstration record_episode(const EpisodeResult& result, const Scene& initial, const TaskSpec& task,
                             const ExecConfig& exec, const std::string& scene_ref) {
  Demonstration d;
  d.instruction = result.instruction;
  d.seed = result.seed;
  d.task = result.task;
  d.scene = scene_ref;
  d.outcome = result.success ? Outcome::Success : Outcome::Failure;
  d.failure = result.failure;
  d.thresholds = task.params;
  d.thresholds["attach_tol"] = exec.attach_tol;
  d.thresholds["push_tol"] = exec.push_tol;
  d.thresholds["contact_tol"] = exec.contact_tol;
  d.thresholds["exec_step"] = exec.step;
  if (!result.exec) return d;
  const auto& steps = result.exec->steps;
  for (size_t i = 0; i < steps.size(); ++i) {
    Frame f;
    f.index = static_cast<int>(i);
    f.pose = steps[i].pose;
    f.jaw = steps[i].jaw;
    d.frames.push_back(std::move(f));
  }
  if (!d.frames.empty()) {
    d.frames.front().depth = render_depth(initial, initial.camera);
    if (d.frames.size() > 1) d.frames.back().depth = render_depth(result.exec->final_scene, initial.camera);
  }
  return d;
}

Dataset filter_successes(const Dataset& ds) {
  Dataset out;
  for (const auto& d : ds.demos) {
    if (d.outcome == Outcome::Success) out.demos.push_back(d);
  }
  return out;
}

void export_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir + ": " + ec.message());
  std::string manifest = std::string(kManifestHeader) + "\n";
  const ManifestCounts counts = ds.manifest();
  manifest += "demos " + std::to_string(counts.total) + "\n";
  for (const auto& [task, c] : counts.per_task) {
    manifest += "task " + std::string(to_string(task)) + " " + std::to_string(c.first) + " " +
                std::to_string(c.second) + "\n";
  }
  for (size_t i = 0; i < ds.demos.size(); ++i) {
    const std::string stem = demo_name(i);
    std::vector<std::pair<std::string, std::string>> blobs;
    const std::string record = serialize_demo(ds.demos[i], stem, blobs);
    for (const auto& [name, bytes] : blobs) write_file(fs::path(dir) / name, bytes);
    write_file(fs::path(dir) / (stem + ".txt"), record);
    manifest += "demo " + stem + ".txt\n";
  }
  // Readers only ever see a complete manifest.
  const fs::path tmp = fs::path(dir) / (std::string(kManifestName) + ".tmp");
  write_file(tmp, manifest);
  fs::rename(tmp, fs::path(dir) / kManifestName, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot publish manifest: " + ec.message());
}

Dataset import_dataset(const std::string& dir) {
  const fs::path mpath = fs::path(dir) / kManifestName;
  std::istringstream in(read_file(mpath));
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw Error(ErrorCode::SchemaVersionMismatch, "manifest header is '" + line + "', expected '" + kManifestHeader + "'");
  }
  Dataset ds;
  ManifestCounts declared;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto t = split(line, ' ');
    if (t[0] == "demos" && t.size() == 2) {
      declared.total = static_cast<int>(to_u64(t[1], kManifestName));
    } else if (t[0] == "task" && t.size() == 4) {
      TaskName task;
      try {
        task = task_from_string(t[1]);
      } catch (const Error& e) {
        corrupt(kManifestName, e.what());
      }
      declared.per_task[task] = {static_cast<int>(to_u64(t[2], kManifestName)),
                                 static_cast<int>(to_u64(t[3], kManifestName))};
    } else if (t[0] == "demo" && t.size() == 2) {
      if (t[1].find('/') != std::string::npos) corrupt(kManifestName, "demo path must be a bare file name");
      ds.demos.push_back(parse_demo(read_file(fs::path(dir) / t[1]), dir, t[1]));
    } else {
      corrupt(kManifestName, "unrecognized line '" + line + "'");
    }
  }
  if (!(declared == ds.manifest())) corrupt(kManifestName, "counts disagree with the records");
  return ds;
}

Demonstration load_demonstration(const std::string& path) {
  const fs::path p(path);
  return parse_demo(read_file(p), p.parent_path(), p.filename().string());
}

TrajectoryPlan replay_plan(const Demonstration& demo, const Aabb3& workspace, std::optional<Pose6D>* grasp) {
  TrajectoryPlan plan;
  if (grasp) grasp->reset();
  for (size_t i = 0; i < demo.frames.size(); ++i) {
    const Frame& f = demo.frames[i];
    if (i > 0 && f.jaw != demo.frames[i - 1].jaw) {
      if (f.jaw == Jaw::Closed) {
        if (grasp && !*grasp) *grasp = demo.frames[i - 1].pose;
        plan.steps.emplace_back(GripperAction::CloseGripper);
      } else {
        plan.steps.emplace_back(GripperAction::OpenGripper);
      }
      continue;
    }
    if (i > 0 && f.pose.position == demo.frames[i - 1].pose.position) continue;
    Vec3 n = normalize_point(f.pose.position, workspace);
    for (int k = 0; k < 3; ++k) n[k] = std::clamp(n[k], 0.0, 1.0);
    plan.steps.emplace_back(Waypoint{n});
  }
  return plan;
}

bool replay_demonstration(const Demonstration& demo, const Scene& scene, const TaskSpec& task, const ExecConfig& exec) {
  std::optional<Pose6D> grasp;
  const TrajectoryPlan plan = replay_plan(demo, scene.workspace, &grasp);
  const ExecutionResult r = execute_trajectory(scene, plan, grasp, exec);
  return !r.failure && check_success(r.final_scene, task);
}

std::pair<double, double> success_stats(std::span<const double> rates) {
  if (rates.empty()) throw Error(ErrorCode::InvalidArgument, "success_stats needs at least one seed group");
  // Summing in sorted order makes the result independent of group order.
  std::vector<double> sorted(rates.begin(), rates.end());
  std::sort(sorted.begin(), sorted.end());
  rates = sorted;
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= static_cast<double>(rates.size());
  if (rates.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double r : rates) ss += (r - mean) * (r - mean);
  return {mean, std::sqrt(ss / static_cast<double>(rates.size() - 1))};
}

double success_rate(const std::vector<bool>& outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::InvalidArgument, "no outcomes");
  size_t wins = 0;
  for (bool b : outcomes) wins += b ? 1 : 0;
  return 100.0 * static_cast<double>(wins) / static_cast<double>(outcomes.size());
}

double linear_fit_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw Error(ErrorCode::DegenerateX, "need at least two points");
  std::vector<std::pair<double, double>> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  points = sorted;
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(points.size());
  my /= static_cast<double>(points.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : points) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateX, "all x values are equal");
  return sxy / sxx;
}

}  // namespace hiertraj
