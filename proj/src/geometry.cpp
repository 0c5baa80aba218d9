#include "hiertraj/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

#include "hiertraj/error.hpp"

namespace hiertraj {

Eigen::Quaterniond canonical_quaternion(Eigen::Quaterniond q) {
  q.normalize();
  double sign = 1.0;
  if (q.w() < 0.0) {
    sign = -1.0;
  } else if (q.w() == 0.0) {
    for (double c : {q.x(), q.y(), q.z()}) {
      if (c != 0.0) {
        sign = c < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
  }
  if (sign < 0.0) q.coeffs() *= -1.0;
  return q;
}

Pose6D::Pose6D(const Point3D& p, const Eigen::Quaterniond& q)
    : position(p), orientation(canonical_quaternion(q)) {}

Pose6D Pose6D::from_rotation(const Point3D& p, const Mat3& r) {
  return Pose6D(p, Eigen::Quaterniond(r));
}

Pose6D Pose6D::compose(const Pose6D& rhs) const {
  return Pose6D(transform(rhs.position), orientation * rhs.orientation);
}

Pose6D Pose6D::inverse() const {
  Eigen::Quaterniond inv = orientation.conjugate();
  return Pose6D(-(inv * position), inv);
}

bool Pose6D::operator==(const Pose6D& o) const {
  return position == o.position && orientation.coeffs() == o.orientation.coeffs();
}

CameraModel CameraModel::overhead() {
  CameraModel cam;
  // 180 degrees about x: camera +z looks down, image rows grow toward -y.
  cam.extrinsic = Pose6D(Point3D(0.0, 0.0, 1.0), Eigen::Quaterniond(0.0, 1.0, 0.0, 0.0));
  return cam;
}

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidArgument, "camera intrinsics must be positive");
  }
}

Vec3 CameraModel::ray_direction(double row, double col) const {
  const Vec3 local((col - cx) / fx, (row - cy) / fy, 1.0);
  return extrinsic.orientation * local;
}

Vec3 CameraModel::optical_axis() const { return extrinsic.orientation * Vec3::UnitZ(); }

size_t DepthImage::valid_count() const {
  return static_cast<size_t>(
      std::count_if(depth.begin(), depth.end(), [](float d) { return d != kInvalid; }));
}

Aabb3::Aabb3(const Point3D& lo, const Point3D& hi) : min(lo), max(hi) {
  if ((lo.array() > hi.array()).any()) {
    throw Error(ErrorCode::InvalidArgument, "aabb min must not exceed max");
  }
}

Aabb3 Aabb3::inflated(double margin) const {
  Aabb3 out;
  out.min = min.array() - margin;
  out.max = max.array() + margin;
  return out;
}

bool Aabb3::overlaps(const Aabb3& o) const {
  return (min.array() <= o.max.array()).all() && (o.min.array() <= max.array()).all();
}

bool OrientedBox::contains(const Point3D& p) const {
  const Vec3 local = pose.inverse_transform(p);
  return std::abs(local.x()) <= half_extents.x() && std::abs(local.y()) <= half_extents.y() &&
         std::abs(local.z()) <= half_extents.z();
}

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

}  // namespace

PixelCoord norm_to_pixel(const NormPoint2D& p, const CameraModel& cam) {
  return PixelCoord{round_half_up((1.0 - p.v) * (cam.height - 1)),
                    round_half_up(p.u * (cam.width - 1))};
}

NormPoint2D pixel_to_norm(const PixelCoord& px, const CameraModel& cam) {
  const double u = cam.width > 1 ? static_cast<double>(px.col) / (cam.width - 1) : 0.0;
  const double v = cam.height > 1 ? 1.0 - static_cast<double>(px.row) / (cam.height - 1) : 0.0;
  return NormPoint2D{u, v};
}

std::optional<Eigen::Vector2d> project_point(const Point3D& p, const CameraModel& cam) {
  const Vec3 local = cam.extrinsic.inverse_transform(p);
  if (local.z() <= 0.0) return std::nullopt;
  return Eigen::Vector2d(cam.fy * local.y() / local.z() + cam.cy,
                         cam.fx * local.x() / local.z() + cam.cx);
}

Point3D lift_pixel(const PixelCoord& px, double depth, const CameraModel& cam) {
  const Vec3 local(depth * (px.col - cam.cx) / cam.fx, depth * (px.row - cam.cy) / cam.fy, depth);
  return cam.extrinsic.transform(local);
}

Point3D lift_point(const NormPoint2D& p, const DepthImage& depth, const CameraModel& cam) {
  const PixelCoord px = norm_to_pixel(p, cam);
  if (px.row < 0 || px.col < 0 || px.row >= depth.height || px.col >= depth.width) {
    throw Error(ErrorCode::OutOfImage, "normalized point maps outside the depth image");
  }
  const float d = depth.at(px.row, px.col);
  if (d == DepthImage::kInvalid) {
    throw Error(ErrorCode::InvalidDepth, "no depth at pixel (" + std::to_string(px.row) + ", " +
                                             std::to_string(px.col) + ")");
  }
  return lift_pixel(px, d, cam);
}

PointCloud backproject_cloud(const DepthImage& depth, const ColorImage* color, const CameraModel& cam) {
  if (depth.width != cam.width || depth.height != cam.height ||
      depth.depth.size() != static_cast<size_t>(depth.width) * depth.height) {
    throw Error(ErrorCode::DimensionMismatch, "depth image does not match camera resolution");
  }
  if (color && (color->width != depth.width || color->height != depth.height)) {
    throw Error(ErrorCode::DimensionMismatch, "color image does not match depth image");
  }
  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  for (int r = 0; r < depth.height; ++r) {
    for (int c = 0; c < depth.width; ++c) {
      const float d = depth.at(r, c);
      if (d == DepthImage::kInvalid) continue;
      cloud.points.push_back(lift_pixel({r, c}, d, cam));
      if (color) cloud.colors.push_back(color->pixels[static_cast<size_t>(r) * depth.width + c]);
    }
  }
  return cloud;
}

PointCloud crop_cloud(const PointCloud& cloud, const Aabb3& box) {
  PointCloud out;
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    if (!box.contains(cloud.points[i])) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_colors()) out.colors.push_back(cloud.colors[i]);
  }
  return out;
}

Mat3 PrincipalFrame::axis_matrix() const {
  Mat3 m;
  m.col(0) = axes[0];
  m.col(1) = axes[1];
  m.col(2) = axes[2];
  return m;
}

namespace {

// Flip so the largest-magnitude component is positive; the first index wins ties.
Vec3 sign_normalized(Vec3 v) {
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(v[i]) > std::abs(v[best]) + 1e-12) best = i;
  }
  return v[best] < 0.0 ? Vec3(-v) : v;
}

// Unit vector orthogonal to `a`, built from the world axis least aligned with it.
Vec3 canonical_orthogonal(const Vec3& a) {
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(a[i]) < std::abs(a[best]) - 1e-12) best = i;
  }
  Vec3 e = Vec3::Zero();
  e[best] = 1.0;
  return (e - e.dot(a) * a).normalized();
}

}  // namespace

PrincipalFrame principal_frame(std::span<const Point3D> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::DegenerateCloud, "principal frame needs at least 3 points");
  }
  PrincipalFrame f;
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  f.centroid = sum / static_cast<double>(points.size());

  Mat3 cov = Mat3::Zero();
  double spread = 0.0;
  for (const auto& p : points) {
    const Vec3 d = p - f.centroid;
    cov.noalias() += d * d.transpose();
    spread = std::max(spread, d.norm());
  }
  if (spread <= 1e-9) {
    throw Error(ErrorCode::DegenerateCloud, "all points coincide");
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 evals = solver.eigenvalues();  // ascending
  const Mat3 evecs = solver.eigenvectors();
  f.variances = Vec3(evals[2], evals[1], evals[0]);

  const double scale = std::max(std::abs(evals[2]), 1e-300);
  const double tie = 1e-9 * scale;

  Vec3 a0 = evecs.col(2);
  Vec3 a1 = evecs.col(1);
  if (std::abs(evals[2] - evals[1]) <= tie) {
    // Isotropic in the leading plane: pin the first axis to the world axis most
    // aligned with that plane so the output stays deterministic.
    Mat3 plane;
    plane.col(0) = evecs.col(2);
    plane.col(1) = evecs.col(1);
    Vec3 best = Vec3::Zero();
    double best_norm = -1.0;
    for (int i = 0; i < 3; ++i) {
      const Vec3 e = Vec3::Unit(i);
      const Vec3 proj = plane * (plane.transpose() * e);
      if (proj.norm() > best_norm + 1e-12) {
        best_norm = proj.norm();
        best = proj;
      }
    }
    a0 = best.normalized();
    a1 = (plane * (plane.transpose() * canonical_orthogonal(a0))).normalized();
  }
  a0 = sign_normalized(a0);
  if (std::abs(evals[1] - evals[0]) <= tie) {
    a1 = canonical_orthogonal(a0);
  }
  a1 = sign_normalized((a1 - a1.dot(a0) * a0).normalized());
  const Vec3 a2 = a0.cross(a1).normalized();
  f.axes = {a0, a1, a2};

  for (const auto& p : points) {
    const Vec3 d = p - f.centroid;
    for (int i = 0; i < 3; ++i) f.extents[i] = std::max(f.extents[i], std::abs(d.dot(f.axes[i])));
  }
  return f;
}

}  // namespace hiertraj
