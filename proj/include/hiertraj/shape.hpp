#pragma once

#include <optional>

#include "hiertraj/geometry.hpp"

namespace hiertraj {

enum class ShapeKind { Box, Cylinder, Sphere };

// Box: dims = half extents. Cylinder: (radius, half height, unused), axis
// along local z. Sphere: (radius, unused, unused).
struct Shape {
  ShapeKind kind = ShapeKind::Box;
  Vec3 dims = Vec3::Zero();

  static Shape box(double hx, double hy, double hz) { return {ShapeKind::Box, Vec3(hx, hy, hz)}; }
  static Shape cylinder(double r, double hh) { return {ShapeKind::Cylinder, Vec3(r, hh, 0.0)}; }
  static Shape sphere(double r) { return {ShapeKind::Sphere, Vec3(r, 0.0, 0.0)}; }

  // Half extents of the local bounding box.
  Vec3 local_half_extents() const;
  double min_dimension() const;
  // Same shape with every dimension reduced by `d` (never below 1e-6).
  Shape shrunk(double d) const;
  void validate() const;
  bool operator==(const Shape& o) const { return kind == o.kind && dims == o.dims; }
};

std::string_view to_string(ShapeKind k);

Aabb3 world_aabb(const Shape& s, const Pose6D& pose);

// Furthest point of the posed shape along world direction `dir`.
Point3D support_point(const Shape& s, const Pose6D& pose, const Vec3& dir);

// Smallest positive ray parameter at which origin + t * dir hits the shape.
std::optional<double> ray_hit(const Shape& s, const Pose6D& pose, const Point3D& origin, const Vec3& dir);

// Euclidean distance from `p` to the solid shape; 0 inside.
double distance_to_solid(const Shape& s, const Pose6D& pose, const Point3D& p);

bool contains_point(const Shape& s, const Pose6D& pose, const Point3D& p);

// Boolean GJK on two convex posed shapes.
bool shapes_intersect(const Shape& a, const Pose6D& pa, const Shape& b, const Pose6D& pb);

}  // namespace hiertraj
