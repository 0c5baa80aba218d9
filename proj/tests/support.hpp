#pragma once

#include <string>

#include "hiertraj/world.hpp"

namespace hiertraj::test {

inline SceneObject make_object(const std::string& id, Shape s, const Point3D& p, Role role = Role::Obstacle,
                               bool graspable = false, double yaw = 0.0) {
  SceneObject o;
  o.id = id;
  o.label = id;
  o.shape = s;
  o.pose = Pose6D(p, Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ())));
  o.initial_pose = o.pose;
  o.role = role;
  o.graspable = graspable;
  return o;
}

// Box resting on the table.
inline SceneObject table_box(const std::string& id, double x, double y, const Vec3& half, double yaw = 0.0,
                             Role role = Role::Obstacle) {
  return make_object(id, Shape::box(half.x(), half.y(), half.z()), Point3D(x, y, half.z()), role,
                     role == Role::Target, yaw);
}

inline std::string fixture(const std::string& name) { return std::string(HIERTRAJ_FIXTURE_DIR) + "/" + name; }

}  // namespace hiertraj::test
