#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace hiertraj {

// Workspace-frame point in meters.
using Point3D = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid pose with a canonical unit quaternion (w >= 0).
struct Pose6D {
  Point3D position = Point3D::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Pose6D() = default;
  Pose6D(const Point3D& p, const Eigen::Quaterniond& q);

  static Pose6D from_rotation(const Point3D& p, const Mat3& r);

  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Point3D transform(const Point3D& local) const { return position + orientation * local; }
  Point3D inverse_transform(const Point3D& world) const {
    return orientation.conjugate() * (world - position);
  }
  Pose6D compose(const Pose6D& rhs) const;
  Pose6D inverse() const;

  bool operator==(const Pose6D& o) const;
};

// Normalizes and flips the quaternion so that w >= 0 (ties at w == 0 resolved
// by making the first nonzero vector component positive).
Eigen::Quaterniond canonical_quaternion(Eigen::Quaterniond q);

struct PixelCoord {
  int row = 0;
  int col = 0;
  bool operator==(const PixelCoord&) const = default;
};

// Normalized image coordinate, origin at the bottom-left corner.
struct NormPoint2D {
  double u = 0.0;
  double v = 0.0;
  bool operator==(const NormPoint2D&) const = default;
};

struct CameraModel {
  double fx = 256.0;
  double fy = 256.0;
  double cx = 127.5;
  double cy = 127.5;
  int width = 256;
  int height = 256;
  Pose6D extrinsic;  // camera-to-workspace

  // Overhead camera 1 m above the table, looking straight down.
  static CameraModel overhead();

  void validate() const;
  int pixel_count() const { return width * height; }
  // Ray direction in workspace frame through pixel (row, col); its component
  // along the optical axis is exactly 1.
  Vec3 ray_direction(double row, double col) const;
  Vec3 optical_axis() const;
};

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<float> depth;  // row-major meters, 0 = no hit

  static constexpr float kInvalid = 0.0f;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), depth(static_cast<size_t>(w) * h, kInvalid) {}

  float at(int row, int col) const { return depth[static_cast<size_t>(row) * width + col]; }
  float& at(int row, int col) { return depth[static_cast<size_t>(row) * width + col]; }
  size_t valid_count() const;
  bool operator==(const DepthImage&) const = default;
};

struct Rgb {
  double r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;
};

struct PointCloud {
  std::vector<Point3D> points;
  std::vector<Rgb> colors;  // empty, or one per point

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }
};

struct Aabb3 {
  Point3D min = Point3D::Zero();
  Point3D max = Point3D::Zero();

  Aabb3() = default;
  Aabb3(const Point3D& lo, const Point3D& hi);

  bool contains(const Point3D& p) const {
    return p.x() >= min.x() && p.y() >= min.y() && p.z() >= min.z() &&
           p.x() <= max.x() && p.y() <= max.y() && p.z() <= max.z();
  }
  Vec3 size() const { return max - min; }
  Point3D center() const { return 0.5 * (min + max); }
  Aabb3 inflated(double margin) const;
  bool overlaps(const Aabb3& o) const;
};

// Oriented box given by its center pose and half extents.
struct OrientedBox {
  Pose6D pose;
  Vec3 half_extents = Vec3::Zero();

  bool contains(const Point3D& p) const;
};

PixelCoord norm_to_pixel(const NormPoint2D& p, const CameraModel& cam);
NormPoint2D pixel_to_norm(const PixelCoord& px, const CameraModel& cam);

// Projects a workspace point into continuous pixel coordinates (row, col).
// Returns nothing when the point lies behind the camera.
std::optional<Eigen::Vector2d> project_point(const Point3D& p, const CameraModel& cam);

Point3D lift_pixel(const PixelCoord& px, double depth, const CameraModel& cam);
Point3D lift_point(const NormPoint2D& p, const DepthImage& depth, const CameraModel& cam);

PointCloud backproject_cloud(const DepthImage& depth, const ColorImage* color, const CameraModel& cam);

PointCloud crop_cloud(const PointCloud& cloud, const Aabb3& box);

struct PrincipalFrame {
  Point3D centroid = Point3D::Zero();
  std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  Vec3 extents = Vec3::Zero();    // half lengths along each axis
  Vec3 variances = Vec3::Zero();  // covariance eigenvalues, descending

  Mat3 axis_matrix() const;
};

PrincipalFrame principal_frame(std::span<const Point3D> points);

}  // namespace hiertraj
