#include "hiertraj/shape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "hiertraj/error.hpp"

namespace hiertraj {

std::string_view to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Sphere: return "sphere";
  }
  return "";
}

Vec3 Shape::local_half_extents() const {
  switch (kind) {
    case ShapeKind::Box: return dims;
    case ShapeKind::Cylinder: return Vec3(dims[0], dims[0], dims[1]);
    case ShapeKind::Sphere: return Vec3::Constant(dims[0]);
  }
  return Vec3::Zero();
}

double Shape::min_dimension() const { return 2.0 * local_half_extents().minCoeff(); }

Shape Shape::shrunk(double d) const {
  Shape s = *this;
  const int n = kind == ShapeKind::Box ? 3 : (kind == ShapeKind::Cylinder ? 2 : 1);
  for (int i = 0; i < n; ++i) s.dims[i] = std::max(1e-6, dims[i] - d);
  return s;
}

void Shape::validate() const {
  const int n = kind == ShapeKind::Box ? 3 : (kind == ShapeKind::Cylinder ? 2 : 1);
  for (int i = 0; i < n; ++i) {
    if (!(dims[i] > 0.0) || !std::isfinite(dims[i])) {
      throw Error(ErrorCode::InvalidArgument, "shape dimensions must be positive");
    }
  }
}

Aabb3 world_aabb(const Shape& s, const Pose6D& pose) {
  Vec3 ext;
  const Mat3 r = pose.rotation();
  switch (s.kind) {
    case ShapeKind::Box:
      ext = r.cwiseAbs() * s.dims;
      break;
    case ShapeKind::Cylinder: {
      const Vec3 a = r.col(2);
      for (int i = 0; i < 3; ++i) {
        ext[i] = std::abs(a[i]) * s.dims[1] + s.dims[0] * std::sqrt(std::max(0.0, 1.0 - a[i] * a[i]));
      }
      break;
    }
    case ShapeKind::Sphere:
      ext = Vec3::Constant(s.dims[0]);
      break;
  }
  Aabb3 box;
  box.min = pose.position - ext;
  box.max = pose.position + ext;
  return box;
}

namespace {

Vec3 local_support(const Shape& s, const Vec3& d) {
  switch (s.kind) {
    case ShapeKind::Box:
      return Vec3(d.x() >= 0 ? s.dims.x() : -s.dims.x(), d.y() >= 0 ? s.dims.y() : -s.dims.y(),
                  d.z() >= 0 ? s.dims.z() : -s.dims.z());
    case ShapeKind::Cylinder: {
      const double rho = std::hypot(d.x(), d.y());
      Vec3 out(0.0, 0.0, d.z() >= 0 ? s.dims[1] : -s.dims[1]);
      if (rho > 1e-15) {
        out.x() = s.dims[0] * d.x() / rho;
        out.y() = s.dims[0] * d.y() / rho;
      }
      return out;
    }
    case ShapeKind::Sphere: {
      const double n = d.norm();
      return n > 1e-15 ? Vec3(s.dims[0] * d / n) : Vec3(s.dims[0], 0.0, 0.0);
    }
  }
  return Vec3::Zero();
}

}  // namespace

Point3D support_point(const Shape& s, const Pose6D& pose, const Vec3& dir) {
  const Vec3 local_dir = pose.orientation.conjugate() * dir;
  return pose.transform(local_support(s, local_dir));
}

namespace {

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// Clips the interval to o + t d inside [-h, h] along one axis.
bool clip_slab(double o, double d, double h, Interval& iv) {
  if (std::abs(d) < 1e-15) return std::abs(o) <= h;
  double t0 = (-h - o) / d;
  double t1 = (h - o) / d;
  if (t0 > t1) std::swap(t0, t1);
  iv.lo = std::max(iv.lo, t0);
  iv.hi = std::min(iv.hi, t1);
  return iv.lo <= iv.hi;
}

std::optional<double> first_positive(const Interval& iv) {
  if (iv.hi < 0.0) return std::nullopt;
  if (iv.lo > 0.0) return iv.lo;
  return iv.hi > 0.0 ? std::optional<double>(iv.hi) : std::nullopt;
}

}  // namespace

std::optional<double> ray_hit(const Shape& s, const Pose6D& pose, const Point3D& origin, const Vec3& dir) {
  const Vec3 o = pose.inverse_transform(origin);
  const Vec3 d = pose.orientation.conjugate() * dir;
  Interval iv;
  switch (s.kind) {
    case ShapeKind::Box:
      for (int i = 0; i < 3; ++i) {
        if (!clip_slab(o[i], d[i], s.dims[i], iv)) return std::nullopt;
      }
      return first_positive(iv);
    case ShapeKind::Sphere: {
      const double a = d.squaredNorm();
      const double b = o.dot(d);
      const double c = o.squaredNorm() - s.dims[0] * s.dims[0];
      const double disc = b * b - a * c;
      if (disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      iv.lo = (-b - sq) / a;
      iv.hi = (-b + sq) / a;
      return first_positive(iv);
    }
    case ShapeKind::Cylinder: {
      if (!clip_slab(o.z(), d.z(), s.dims[1], iv)) return std::nullopt;
      const double a = d.x() * d.x() + d.y() * d.y();
      const double r2 = s.dims[0] * s.dims[0];
      const double c = o.x() * o.x() + o.y() * o.y() - r2;
      if (a < 1e-15) {
        if (c > 0.0) return std::nullopt;
      } else {
        const double b = o.x() * d.x() + o.y() * d.y();
        const double disc = b * b - a * c;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        iv.lo = std::max(iv.lo, (-b - sq) / a);
        iv.hi = std::min(iv.hi, (-b + sq) / a);
        if (iv.lo > iv.hi) return std::nullopt;
      }
      return first_positive(iv);
    }
  }
  return std::nullopt;
}

double distance_to_solid(const Shape& s, const Pose6D& pose, const Point3D& p) {
  const Vec3 l = pose.inverse_transform(p);
  switch (s.kind) {
    case ShapeKind::Box: {
      const Vec3 q = (l.cwiseAbs() - s.dims).cwiseMax(0.0);
      return q.norm();
    }
    case ShapeKind::Sphere:
      return std::max(0.0, l.norm() - s.dims[0]);
    case ShapeKind::Cylinder: {
      const double dr = std::max(0.0, std::hypot(l.x(), l.y()) - s.dims[0]);
      const double dz = std::max(0.0, std::abs(l.z()) - s.dims[1]);
      return std::hypot(dr, dz);
    }
  }
  return 0.0;
}

bool contains_point(const Shape& s, const Pose6D& pose, const Point3D& p) {
  const Vec3 l = pose.inverse_transform(p);
  switch (s.kind) {
    case ShapeKind::Box:
      return (l.cwiseAbs().array() <= s.dims.array()).all();
    case ShapeKind::Sphere:
      return l.norm() <= s.dims[0];
    case ShapeKind::Cylinder:
      return std::hypot(l.x(), l.y()) <= s.dims[0] && std::abs(l.z()) <= s.dims[1];
  }
  return false;
}

namespace {

constexpr double kTiny = 1e-20;

struct Simplex {
  std::array<Vec3, 4> p;  // oldest first, newest last
  int n = 0;
  void set(std::initializer_list<Vec3> pts) {
    n = 0;
    for (const auto& v : pts) p[n++] = v;
  }
};

Vec3 triple(const Vec3& a, const Vec3& b, const Vec3& c) { return a.cross(b).cross(c); }

bool do_line(Simplex& s, Vec3& d) {
  const Vec3 b = s.p[0], a = s.p[1];
  const Vec3 ab = b - a, ao = -a;
  if (ab.dot(ao) > 0.0) {
    d = triple(ab, ao, ab);
    if (d.squaredNorm() < kTiny * std::max(1.0, ab.squaredNorm())) return true;
  } else {
    s.set({a});
    d = ao;
  }
  return false;
}

bool do_triangle(Simplex& s, Vec3& d) {
  const Vec3 c = s.p[0], b = s.p[1], a = s.p[2];
  const Vec3 ab = b - a, ac = c - a, ao = -a;
  const Vec3 abc = ab.cross(ac);
  if (abc.squaredNorm() < kTiny) {
    s.set({b, a});
    return do_line(s, d);
  }
  if (abc.cross(ac).dot(ao) > 0.0) {
    if (ac.dot(ao) > 0.0) {
      s.set({c, a});
      d = triple(ac, ao, ac);
      return false;
    }
    s.set({b, a});
    return do_line(s, d);
  }
  if (ab.cross(abc).dot(ao) > 0.0) {
    s.set({b, a});
    return do_line(s, d);
  }
  const double side = abc.dot(ao);
  if (std::abs(side) <= 1e-14 * abc.norm()) return true;
  d = side > 0.0 ? abc : Vec3(-abc);
  return false;
}

bool do_tetra(Simplex& s, Vec3& d) {
  const Vec3 pd = s.p[0], pc = s.p[1], pb = s.p[2], pa = s.p[3];
  const Vec3 ao = -pa;
  const double vol = (pb - pa).cross(pc - pa).dot(pd - pa);
  if (std::abs(vol) < 1e-18) {
    s.set({pc, pb, pa});
    return do_triangle(s, d);
  }
  const std::array<std::array<Vec3, 3>, 3> faces{{{pb, pc, pd}, {pc, pd, pb}, {pd, pb, pc}}};
  for (const auto& f : faces) {
    Vec3 n = (f[0] - pa).cross(f[1] - pa);
    if (n.dot(f[2] - pa) > 0.0) n = -n;
    if (n.dot(ao) > 0.0) {
      s.set({f[1], f[0], pa});
      return do_triangle(s, d);
    }
  }
  return true;
}

bool do_simplex(Simplex& s, Vec3& d) {
  switch (s.n) {
    case 2: return do_line(s, d);
    case 3: return do_triangle(s, d);
    case 4: return do_tetra(s, d);
  }
  return false;
}

}  // namespace

bool shapes_intersect(const Shape& a, const Pose6D& pa, const Shape& b, const Pose6D& pb) {
  auto support = [&](const Vec3& dir) -> Vec3 {
    return support_point(a, pa, dir) - support_point(b, pb, -dir);
  };
  Vec3 d = pb.position - pa.position;
  if (d.squaredNorm() < 1e-24) d = Vec3::UnitX();
  Simplex s;
  s.set({support(d)});
  d = -s.p[0];
  for (int iter = 0; iter < 64; ++iter) {
    const double dn = d.norm();
    if (dn < 1e-12) return true;
    d /= dn;
    const Vec3 p = support(d);
    const double reach = p.dot(d);
    if (reach < 0.0) return false;
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.n; ++i) best = std::max(best, s.p[i].dot(d));
    // No progress toward the origin: it lies outside (or on) the difference.
    if (reach - best < 1e-12) return false;
    s.p[s.n++] = p;
    if (do_simplex(s, d)) return true;
  }
  return false;
}

}  // namespace hiertraj
