#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hiertraj/error.hpp"
#include "hiertraj/world.hpp"

namespace hiertraj {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::SceneFormat, msg); }

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> required,
               std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) bad(where + ": expected an object");
  std::set<std::string> allowed;
  for (const char* k : required) {
    allowed.insert(k);
    if (!j.contains(k)) bad(where + ": missing key '" + k + "'");
  }
  for (const char* k : optional) allowed.insert(k);
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) bad(where + ": unknown key '" + k + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where + ": expected a number");
  return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) bad(where + ": expected 3 numbers");
  return Vec3(number(j[0], where), number(j[1], where), number(j[2], where));
}

Pose6D pose(const json& j, const std::string& where) {
  only_keys(j, where, {"xyz", "quat"});
  const json& q = j["quat"];
  if (!q.is_array() || q.size() != 4) bad(where + ".quat: expected 4 numbers [w, x, y, z]");
  Eigen::Quaterniond quat(number(q[0], where), number(q[1], where), number(q[2], where), number(q[3], where));
  if (quat.norm() < 1e-9) bad(where + ".quat: zero quaternion");
  return Pose6D(vec3(j["xyz"], where + ".xyz"), quat);
}

Shape shape(const json& j, const std::string& where) {
  only_keys(j, where, {"kind", "dims"});
  if (!j["kind"].is_string()) bad(where + ".kind: expected a string");
  const std::string kind = j["kind"];
  const json& d = j["dims"];
  if (!d.is_array()) bad(where + ".dims: expected an array");
  auto dim = [&](size_t i) { return number(d[i], where + ".dims"); };
  Shape s;
  if (kind == "box") {
    if (d.size() != 3) bad(where + ".dims: box needs 3 half extents");
    s = Shape::box(dim(0), dim(1), dim(2));
  } else if (kind == "cylinder") {
    if (d.size() != 2) bad(where + ".dims: cylinder needs [radius, half_height]");
    s = Shape::cylinder(dim(0), dim(1));
  } else if (kind == "sphere") {
    if (d.size() != 1) bad(where + ".dims: sphere needs [radius]");
    s = Shape::sphere(dim(0));
  } else {
    bad(where + ".kind: unknown shape '" + kind + "'");
  }
  try {
    s.validate();
  } catch (const Error& e) {
    bad(where + ": " + e.what());
  }
  return s;
}

json pose_json(const Pose6D& p) {
  const auto& q = p.orientation;
  return json{{"xyz", {p.position.x(), p.position.y(), p.position.z()}}, {"quat", {q.w(), q.x(), q.y(), q.z()}}};
}

}  // namespace

SceneFile parse_scene_file(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  only_keys(root, "scene", {"workspace", "camera", "objects", "task"});
  SceneFile out;
  Scene& scene = out.scene;

  const json& ws = root["workspace"];
  only_keys(ws, "workspace", {"min", "max"});
  try {
    scene.workspace = Aabb3(vec3(ws["min"], "workspace.min"), vec3(ws["max"], "workspace.max"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SceneFormat) throw;
    bad(std::string("workspace: ") + e.what());
  }

  const json& cam = root["camera"];
  only_keys(cam, "camera", {"fx", "fy", "cx", "cy", "width", "height", "pose"});
  CameraModel c;
  c.fx = number(cam["fx"], "camera.fx");
  c.fy = number(cam["fy"], "camera.fy");
  c.cx = number(cam["cx"], "camera.cx");
  c.cy = number(cam["cy"], "camera.cy");
  if (!cam["width"].is_number_integer() || !cam["height"].is_number_integer()) {
    bad("camera: width and height must be integers");
  }
  c.width = cam["width"];
  c.height = cam["height"];
  c.extrinsic = pose(cam["pose"], "camera.pose");
  try {
    c.validate();
  } catch (const Error& e) {
    bad(std::string("camera: ") + e.what());
  }
  scene.camera = c;

  const json& objs = root["objects"];
  if (!objs.is_array()) bad("objects: expected an array");
  for (size_t i = 0; i < objs.size(); ++i) {
    const std::string where = "objects[" + std::to_string(i) + "]";
    const json& o = objs[i];
    only_keys(o, where, {"id", "label", "shape", "pose", "role", "graspable"}, {"affordance_anchor"});
    SceneObject so;
    if (!o["id"].is_string() || !o["label"].is_string() || !o["role"].is_string()) {
      bad(where + ": id, label and role must be strings");
    }
    if (!o["graspable"].is_boolean()) bad(where + ".graspable: expected a boolean");
    so.id = o["id"];
    so.label = o["label"];
    so.shape = shape(o["shape"], where + ".shape");
    so.pose = pose(o["pose"], where + ".pose");
    so.initial_pose = so.pose;
    so.role = role_from_string(o["role"].get<std::string>());
    so.graspable = o["graspable"];
    if (o.contains("affordance_anchor")) so.affordance_anchor = vec3(o["affordance_anchor"], where + ".affordance_anchor");
    scene.objects.push_back(std::move(so));
  }
  try {
    scene.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SceneFormat) throw;
    bad(e.what());
  }

  const json& t = root["task"];
  only_keys(t, "task", {"name", "target_id", "goal_id", "params"});
  if (!t["name"].is_string() || !t["target_id"].is_string()) bad("task: name and target_id must be strings");
  try {
    out.task.name = task_from_string(t["name"].get<std::string>());
  } catch (const Error& e) {
    bad(e.what());
  }
  out.task.instruction = default_instruction(out.task.name);
  out.task.target_id = t["target_id"];
  if (!t["goal_id"].is_null()) {
    if (!t["goal_id"].is_string()) bad("task.goal_id: expected a string or null");
    out.task.goal_id = t["goal_id"].get<std::string>();
  }
  if (!t["params"].is_object()) bad("task.params: expected an object");
  out.task.params = default_task_params(out.task.name);
  for (const auto& [k, v] : t["params"].items()) out.task.params[k] = number(v, "task.params." + k);
  if (!scene.find(out.task.target_id)) bad("task.target_id: no object '" + out.task.target_id + "'");
  if (out.task.goal_id && !scene.find(*out.task.goal_id)) bad("task.goal_id: no object '" + *out.task.goal_id + "'");
  return out;
}

SceneFile load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scene file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_file(ss.str());
}

std::string serialize_scene_file(const Scene& scene, const TaskSpec& task) {
  json root;
  const auto& ws = scene.workspace;
  root["workspace"] = {{"min", {ws.min.x(), ws.min.y(), ws.min.z()}}, {"max", {ws.max.x(), ws.max.y(), ws.max.z()}}};
  const auto& c = scene.camera;
  root["camera"] = {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy},
                    {"width", c.width}, {"height", c.height}, {"pose", pose_json(c.extrinsic)}};
  json objs = json::array();
  for (const auto& o : scene.objects) {
    json j;
    j["id"] = o.id;
    j["label"] = o.label;
    json dims = json::array();
    const int n = o.shape.kind == ShapeKind::Box ? 3 : (o.shape.kind == ShapeKind::Cylinder ? 2 : 1);
    for (int i = 0; i < n; ++i) dims.push_back(o.shape.dims[i]);
    j["shape"] = {{"kind", std::string(to_string(o.shape.kind))}, {"dims", dims}};
    j["pose"] = pose_json(o.pose);
    j["role"] = std::string(to_string(o.role));
    j["graspable"] = o.graspable;
    if (o.affordance_anchor) {
      j["affordance_anchor"] = {o.affordance_anchor->x(), o.affordance_anchor->y(), o.affordance_anchor->z()};
    }
    objs.push_back(j);
  }
  root["objects"] = objs;
  json params = json::object();
  for (const auto& [k, v] : task.params) params[k] = v;
  root["task"] = {{"name", std::string(to_string(task.name))},
                  {"target_id", task.target_id},
                  {"goal_id", task.goal_id ? json(*task.goal_id) : json(nullptr)},
                  {"params", params}};
  return root.dump(2) + "\n";
}

}  // namespace hiertraj
