#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "hiertraj/error.hpp"
#include "hiertraj/hash.hpp"
#include "hiertraj/perception.hpp"

namespace hiertraj {

size_t SegMask::count() const {
  return static_cast<size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

const AffordanceEntry* AffordanceSet::find(std::string_view label) const {
  for (const auto& e : entries) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

void AffordanceSet::validate(size_t min_points) const {
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (!seen.insert(e.label).second) throw Error(ErrorCode::DuplicateLabel, "label '" + e.label + "' repeated");
    if (e.points.size() < min_points) {
      throw Error(ErrorCode::InsufficientSpread, "entry '" + e.label + "' has " + std::to_string(e.points.size()) +
                                                     " points, needs " + std::to_string(min_points));
    }
    for (const auto& p : e.points) {
      if (!(p.u >= 0.0 && p.u <= 1.0 && p.v >= 0.0 && p.v <= 1.0)) {
        throw Error(ErrorCode::RangeViolation, "point of '" + e.label + "' outside [0,1]");
      }
    }
  }
}

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

class SyntheticBackend : public SegBackend {
 public:
  SyntheticBackend(const Scene& scene, const CameraModel& cam, const RenderOutput& render, double error_rate,
                   std::uint64_t seed)
      : width_(cam.width), height_(cam.height), error_rate_(error_rate), seed_(seed) {
    if (!(error_rate >= 0.0 && error_rate < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "error_rate must lie in [0, 1)");
    }
    if (render.object_index.size() != static_cast<size_t>(cam.pixel_count())) {
      throw Error(ErrorCode::DimensionMismatch, "render does not match the camera");
    }
    hit_ = render.object_index;
    for (const auto& o : scene.objects) {
      ids_.push_back(o.id);
      labels_.push_back(o.label);
    }
  }

  SegMask reference(const std::string& label) const override {
    std::vector<char> match(ids_.size(), 0);
    bool by_id = false;
    for (size_t k = 0; k < ids_.size(); ++k) {
      if (ids_[k] == label) {
        match[k] = 1;
        by_id = true;
      }
    }
    if (!by_id) {
      for (size_t k = 0; k < labels_.size(); ++k) match[k] = labels_[k] == label;
    }
    SegMask m(width_, height_);
    for (size_t i = 0; i < hit_.size(); ++i) {
      if (hit_[i] >= 0 && match[static_cast<size_t>(hit_[i])]) m.bits[i] = 1;
    }
    return m;
  }

  SegMask segment(const std::string& label, std::span<const FeedbackPoint> feedback) override {
    State& st = state(label);
    for (size_t i = st.consumed; i < feedback.size(); ++i) {
      const FeedbackPoint& f = feedback[i];
      if (f.polarity != Polarity::Negative) continue;
      std::vector<int> kept;
      for (int idx : st.errors) {
        const int r = idx / width_, c = idx % width_;
        if (std::abs(r - f.pixel.row) <= 1 && std::abs(c - f.pixel.col) <= 1) continue;
        kept.push_back(idx);
      }
      kept.resize(kept.size() / 2);
      st.errors = std::move(kept);
    }
    st.consumed = std::max(st.consumed, feedback.size());
    SegMask m = st.truth;
    for (int idx : st.errors) m.bits[static_cast<size_t>(idx)] ^= 1;
    return m;
  }

 private:
  struct State {
    SegMask truth;
    std::vector<int> errors;
    size_t consumed = 0;
  };

  State& state(const std::string& label) {
    auto it = states_.find(label);
    if (it != states_.end()) return it->second;
    State st;
    st.truth = reference(label);
    const size_t n = static_cast<size_t>(std::floor(error_rate_ * static_cast<double>(st.truth.count())));
    if (n > 0) {
      int r0 = height_, r1 = -1, c0 = width_, c1 = -1;
      for (int r = 0; r < height_; ++r) {
        for (int c = 0; c < width_; ++c) {
          if (!st.truth.at(r, c)) continue;
          r0 = std::min(r0, r);
          r1 = std::max(r1, r);
          c0 = std::min(c0, c);
          c1 = std::max(c1, c);
        }
      }
      const int pad = 4;
      r0 = std::max(0, r0 - pad);
      c0 = std::max(0, c0 - pad);
      r1 = std::min(height_ - 1, r1 + pad);
      c1 = std::min(width_ - 1, c1 + pad);
      std::vector<int> window;
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) window.push_back(r * width_ + c);
      std::mt19937_64 rng(seed_ ^ fnv1a64(label));
      for (size_t i = 0; i < n && i < window.size(); ++i) {
        const size_t j = i + std::uniform_int_distribution<size_t>(0, window.size() - 1 - i)(rng);
        std::swap(window[i], window[j]);
        st.errors.push_back(window[i]);
      }
    }
    return states_.emplace(label, std::move(st)).first->second;
  }

  int width_, height_;
  double error_rate_;
  std::uint64_t seed_;
  std::vector<int> hit_;
  std::vector<std::string> ids_, labels_;
  std::map<std::string, State> states_;
};

struct Component {
  size_t size = 0;
  int first = 0;
  double sum_r = 0.0, sum_c = 0.0;
};

// 8-connected components in row-major discovery order.
std::vector<Component> components(const SegMask& m) {
  std::vector<int> seen(m.bits.size(), 0);
  std::vector<Component> out;
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(m.bits.size()); ++start) {
    if (!m.bits[start] || seen[start]) continue;
    Component comp;
    comp.first = start;
    stack.push_back(start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int r = idx / m.width, c = idx % m.width;
      ++comp.size;
      comp.sum_r += r;
      comp.sum_c += c;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= m.height || cc >= m.width) continue;
          const int j = rr * m.width + cc;
          if (m.bits[j] && !seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
        }
      }
    }
    out.push_back(comp);
  }
  return out;
}

PixelCoord clamp_pixel(int r, int c, const SegMask& m) {
  return PixelCoord{std::clamp(r, 0, m.height - 1), std::clamp(c, 0, m.width - 1)};
}

std::optional<PixelCoord> mask_centroid(const SegMask& m) {
  double sr = 0, sc = 0;
  size_t n = 0;
  for (int r = 0; r < m.height; ++r)
    for (int c = 0; c < m.width; ++c)
      if (m.at(r, c)) {
        sr += r;
        sc += c;
        ++n;
      }
  if (n == 0) return std::nullopt;
  return clamp_pixel(round_half_up(sr / n), round_half_up(sc / n), m);
}

CameraModel grid_of(const SegMask& m) {
  CameraModel cam;
  cam.width = m.width;
  cam.height = m.height;
  return cam;
}

}  // namespace

std::unique_ptr<SegBackend> synthetic_backend(const Scene& scene, const CameraModel& cam, double error_rate,
                                              std::uint64_t seed) {
  return std::make_unique<SyntheticBackend>(scene, cam, render_scene(scene, cam), error_rate, seed);
}

std::unique_ptr<SegBackend> synthetic_backend(const Scene& scene, const CameraModel& cam, const RenderOutput& render,
                                              double error_rate, std::uint64_t seed) {
  return std::make_unique<SyntheticBackend>(scene, cam, render, error_rate, seed);
}

RefineResult refine_segmentation(SegBackend& backend, const std::string& label, int n_max) {
  if (n_max < 1) throw Error(ErrorCode::InvalidArgument, "n_max must be at least 1");
  const SegMask truth = backend.reference(label);
  std::vector<FeedbackPoint> feedback;
  RefineResult res;
  for (int it = 1; it <= n_max; ++it) {
    res.mask = backend.segment(label, feedback);
    res.iterations = it;
    if (res.mask.width != truth.width || res.mask.height != truth.height) {
      throw Error(ErrorCode::BackendFailure, "backend returned a mask of the wrong size");
    }
    SegMask err(truth.width, truth.height);
    for (size_t i = 0; i < err.bits.size(); ++i) err.bits[i] = res.mask.bits[i] != truth.bits[i];
    const size_t n_err = err.count();
    res.error_counts.push_back(n_err);
    if (n_err == 0 || it == n_max) break;

    std::vector<Component> comps = components(err);
    std::stable_sort(comps.begin(), comps.end(),
                     [](const Component& a, const Component& b) { return a.size > b.size; });
    for (size_t k = 0; k < comps.size() && k < 3; ++k) {
      const Component& c = comps[k];
      feedback.push_back({clamp_pixel(round_half_up(c.sum_r / c.size), round_half_up(c.sum_c / c.size), err),
                          Polarity::Negative});
    }
    if (auto c = mask_centroid(res.mask)) feedback.push_back({*c, Polarity::Positive});
  }
  return res;
}

std::vector<NormPoint2D> sample_affordance_points(const SegMask& mask, int k, bool allow_sparse) {
  if (k < 1 || (!allow_sparse && k < 3)) throw Error(ErrorCode::InvalidArgument, "k must be at least 3");
  std::vector<PixelCoord> px;
  for (int r = 0; r < mask.height; ++r)
    for (int c = 0; c < mask.width; ++c)
      if (mask.at(r, c)) px.push_back({r, c});
  if (px.empty()) throw Error(ErrorCode::EmptyMask, "mask has no pixels");

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& p : px) mean += Eigen::Vector2d(p.row, p.col);
  mean /= static_cast<double>(px.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : px) {
    const Eigen::Vector2d d = Eigen::Vector2d(p.row, p.col) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(px.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
  Eigen::Vector2d major = solver.eigenvectors().col(1);
  const Eigen::Vector2d ev = solver.eigenvalues();
  if (std::abs(ev[1] - ev[0]) <= 1e-9 * std::max(std::abs(ev[1]), 1e-300)) major = Eigen::Vector2d(0.0, 1.0);
  const int lead = std::abs(major[0]) > std::abs(major[1]) ? 0 : 1;
  if (major[lead] < 0) major = -major;
  Eigen::Vector2d minor(-major[1], major[0]);
  const int lead_minor = std::abs(minor[0]) > std::abs(minor[1]) ? 0 : 1;
  if (minor[lead_minor] < 0) minor = -minor;

  auto nearest = [&](const Eigen::Vector2d& target) {
    size_t best = 0;
    double best_d = 1e300;
    for (size_t i = 0; i < px.size(); ++i) {
      const double d = (Eigen::Vector2d(px[i].row, px[i].col) - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return px[best];
  };
  auto snap = [&](const Eigen::Vector2d& target) {
    const PixelCoord p = clamp_pixel(round_half_up(target[0]), round_half_up(target[1]), mask);
    return mask.at(p.row, p.col) ? p : nearest(target);
  };
  // Farthest pixel along `axis` among those within a pixel of the axis line
  // through the mean; the whole mask when the line misses it.
  auto extreme = [&](const Eigen::Vector2d& axis) {
    const Eigen::Vector2d perp(-axis[1], axis[0]);
    for (double band : {1.0, 1e300}) {
      std::optional<size_t> best;
      double best_s = -1e300;
      for (size_t i = 0; i < px.size(); ++i) {
        const Eigen::Vector2d d = Eigen::Vector2d(px[i].row, px[i].col) - mean;
        if (std::abs(d.dot(perp)) > band) continue;
        const double s = d.dot(axis);
        if (s > best_s + 1e-12) {
          best_s = s;
          best = i;
        }
      }
      if (best) return px[*best];
    }
    return px.front();
  };

  std::vector<PixelCoord> cand{snap(mean), extreme(major), extreme(-major), extreme(minor), extreme(-minor)};
  const PixelCoord center = cand[0];
  for (size_t i = 1; i < 5; ++i) {
    const Eigen::Vector2d mid = 0.5 * (Eigen::Vector2d(center.row, center.col) +
                                       Eigen::Vector2d(cand[i].row, cand[i].col));
    cand.push_back(snap(mid));
  }
  std::vector<PixelCoord> unique;
  for (const auto& p : cand) {
    if (std::find(unique.begin(), unique.end(), p) == unique.end()) unique.push_back(p);
    if (static_cast<int>(unique.size()) == k) break;
  }
  if (!allow_sparse && unique.size() < 3) {
    throw Error(ErrorCode::InsufficientSpread,
                "mask yields only " + std::to_string(unique.size()) + " distinct points");
  }
  const CameraModel grid = grid_of(mask);
  std::vector<NormPoint2D> out;
  for (const auto& p : unique) out.push_back(pixel_to_norm(p, grid));
  return out;
}

AffordanceSet detect_affordances(SegBackend& backend, const std::vector<std::string>& labels,
                                 const PerceptionConfig& cfg) {
  const bool sparse = cfg.points_per_object < 3;
  AffordanceSet out;
  for (const auto& label : labels) {
    const SegMask truth = backend.reference(label);
    if (truth.count() == 0) throw Error(ErrorCode::ObjectNotVisible, "'" + label + "' is not visible");
    const RefineResult refined = refine_segmentation(backend, label, cfg.n_max);
    std::vector<NormPoint2D> pts = sample_affordance_points(refined.mask, cfg.points_per_object, sparse);
    if (cfg.noise_px > 0.0) {
      std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL ^ fnv1a64(label));
      std::normal_distribution<double> n(0.0, cfg.noise_px);
      const double su = truth.width > 1 ? 1.0 / (truth.width - 1) : 0.0;
      const double sv = truth.height > 1 ? 1.0 / (truth.height - 1) : 0.0;
      for (auto& p : pts) {
        const double du = n(rng), dv = n(rng);
        p.u = std::clamp(p.u + du * su, 0.0, 1.0);
        p.v = std::clamp(p.v + dv * sv, 0.0, 1.0);
      }
    }
    out.entries.push_back({label, std::move(pts)});
  }
  out.validate(sparse ? 1 : 3);
  return out;
}

AffordanceSet detect_affordances(const Scene& scene, const CameraModel& cam, const std::vector<std::string>& labels,
                                 const PerceptionConfig& cfg) {
  auto backend = synthetic_backend(scene, cam, cfg.error_rate, cfg.seed);
  return detect_affordances(*backend, labels, cfg);
}

std::vector<std::string> visible_objects(const Scene& scene, const CameraModel& cam, size_t min_pixels) {
  return visible_objects(scene, render_scene(scene, cam), min_pixels);
}

std::vector<std::string> visible_objects(const Scene& scene, const RenderOutput& out, size_t min_pixels) {
  std::vector<size_t> counts(scene.objects.size(), 0);
  for (int idx : out.object_index)
    if (idx >= 0) ++counts[static_cast<size_t>(idx)];
  std::vector<std::string> ids;
  for (size_t k = 0; k < scene.objects.size(); ++k)
    if (counts[k] >= min_pixels) ids.push_back(scene.objects[k].id);
  return ids;
}

void write_pgm(std::ostream& out, const SegMask& mask) {
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  for (auto b : mask.bits) out.put(static_cast<char>(b ? 255 : 0));
}

}  // namespace hiertraj
