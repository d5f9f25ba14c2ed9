#include "graspsight/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "graspsight/errors.hpp"

namespace gs::worldsim {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct GraspFrame {
  Vec2 g;        // grasp centre
  Vec2 u;        // closing axis direction (unit)
  Vec2 v;        // pad direction (unit, perpendicular)
  double half_ap;
};

GraspFrame frame_of(const GraspCommand& c) {
  GraspFrame f;
  f.g = {c.x, c.y};
  f.u = {-std::sin(c.theta), std::cos(c.theta)};
  f.v = {std::cos(c.theta), std::sin(c.theta)};
  f.half_ap = c.aperture / 2.0;
  return f;
}

double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }

Vec2 sub(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }

// Object corner positions for boxes, in world coordinates.
void box_corners(const ObjectInstance& o, Vec2 out[4]) {
  double ce = std::cos(o.orientation), se = std::sin(o.orientation);
  Vec2 ep = {ce, se};        // local +p axis
  Vec2 eq = {-se, ce};       // local +q axis
  double sp[4] = {1, 1, -1, -1};
  double sq[4] = {1, -1, -1, 1};
  for (int i = 0; i < 4; ++i)
    out[i] = {o.center.x + sp[i] * o.half_w * ep.x + sq[i] * o.half_h * eq.x,
              o.center.y + sp[i] * o.half_w * ep.y + sq[i] * o.half_h * eq.y};
}

bool point_in_object(const Vec2& p, const ObjectInstance& o) {
  if (o.kind == ShapeKind::disc) {
    Vec2 d = sub(p, o.center);
    return d.x * d.x + d.y * d.y < o.radius * o.radius;
  }
  double ce = std::cos(o.orientation), se = std::sin(o.orientation);
  Vec2 d = sub(p, o.center);
  double lp = d.x * ce + d.y * se;
  double lq = -d.x * se + d.y * ce;
  return std::fabs(lp) < o.half_w && std::fabs(lq) < o.half_h;
}

// t-interval of the object along the closing axis (the line through g with
// direction u), in grasp-frame coordinates. Returns false when the axis
// misses the object.
bool axis_interval(const ObjectInstance& o, const GraspFrame& f, double& lo, double& hi) {
  if (o.kind == ShapeKind::disc) {
    Vec2 d = sub(o.center, f.g);
    double tc = dot(d, f.u), sc = dot(d, f.v);
    if (std::fabs(sc) >= o.radius) return false;
    double q = std::sqrt(o.radius * o.radius - sc * sc);
    lo = tc - q;
    hi = tc + q;
    return true;
  }
  // Box: clip the s=0 line against the rectangle's edges in grasp-frame
  // coordinates.
  Vec2 corners[4];
  box_corners(o, corners);
  double ct[4], cs[4];
  for (int i = 0; i < 4; ++i) {
    Vec2 d = sub(corners[i], f.g);
    ct[i] = dot(d, f.u);
    cs[i] = dot(d, f.v);
  }
  bool any = false;
  lo = hi = 0.0;
  auto take = [&](double t) {
    if (!any) {
      lo = hi = t;
      any = true;
    } else {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  };
  for (int i = 0; i < 4; ++i) {
    int j = (i + 1) & 3;
    double a = cs[i], b = cs[j];
    if (a == 0.0) take(ct[i]);
    if ((a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)) {
      double alpha = a / (a - b);
      take(ct[i] + alpha * (ct[j] - ct[i]));
    }
  }
  return any && hi > lo;
}

struct GraspAnalysis {
  GraspOutcome outcome;
  int focus_object = -1;  // object the gripper interacts with, -1 if none
};

// The grasp rule. All four predicates live on the closing axis: fingertips
// are points on it, contact is the first axis crossing while closing, the
// pad half-length enters only through the centroid-offset test. Keeping the
// geometry one-dimensional along the axis means the raster replica can only
// disagree near extent == aperture tangencies.
GraspAnalysis analyze_grasp(const Scene& scene, const GraspCommand& c,
                            const WorldParams& params) {
  GraspAnalysis out;
  GraspFrame f = frame_of(c);
  double L = params.pad_half_len;
  auto [tip1, tip2] = fingertips(c);

  // Fingertips must start clear of every object.
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    if (point_in_object(tip1, scene.objects[i]) || point_in_object(tip2, scene.objects[i])) {
      out.outcome.reason = GraspReason::collision;
      out.focus_object = int(i);
      return out;
    }
  }

  // First contact while closing: the object whose axis interval reaches
  // highest (finger 1) and lowest (finger 2).
  int first1 = -1, first2 = -1;
  double best_hi = 0.0, best_lo = 0.0;
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    double lo, hi;
    if (!axis_interval(scene.objects[i], f, lo, hi)) continue;
    if (lo >= f.half_ap || hi <= -f.half_ap) continue;  // outside the closing path
    if (first1 < 0 || hi > best_hi) {
      first1 = int(i);
      best_hi = hi;
    }
    if (first2 < 0 || lo < best_lo) {
      first2 = int(i);
      best_lo = lo;
    }
  }
  if (first1 < 0) {
    out.outcome.reason = GraspReason::miss;
    return out;
  }
  if (first1 != first2) {
    out.outcome.reason = GraspReason::multi_contact;
    out.focus_object = first1;
    return out;
  }
  out.focus_object = first1;

  double lo, hi;
  axis_interval(scene.objects[size_t(first1)], f, lo, hi);
  double extent = std::min(hi, f.half_ap) - std::max(lo, -f.half_ap);
  if (!(extent > 0.0) || extent > c.aperture) {
    out.outcome.reason = GraspReason::miss;
    return out;
  }

  // Centroid must sit on the pads.
  Vec2 d = sub(scene.objects[size_t(first1)].center, f.g);
  if (std::fabs(dot(d, f.v)) > L) {
    out.outcome.reason = GraspReason::miss;
    return out;
  }

  out.outcome.success = true;
  out.outcome.reason = GraspReason::ok;
  out.outcome.grasped_index = first1;
  return out;
}

// -- rendering ---------------------------------------------------------------

bool in_wall(const Vec2& w, const WorldParams& p) {
  bool inside_outer = w.x >= p.bin_min - p.wall_thickness && w.x <= p.bin_max + p.wall_thickness &&
                      w.y >= p.bin_min - p.wall_thickness && w.y <= p.bin_max + p.wall_thickness;
  bool inside_inner = w.x > p.bin_min && w.x < p.bin_max && w.y > p.bin_min && w.y < p.bin_max;
  return inside_outer && !inside_inner;
}

bool sprite_contains(const Vec2& w, const GraspFrame& f, const WorldParams& p) {
  Vec2 d = sub(w, f.g);
  double t = dot(d, f.u), s = dot(d, f.v);
  if (std::fabs(s) <= p.pad_half_len &&
      (std::fabs(t - f.half_ap) <= p.finger_thickness / 2.0 ||
       std::fabs(t + f.half_ap) <= p.finger_thickness / 2.0))
    return true;
  return std::fabs(t) <= f.half_ap && std::fabs(s) <= p.crossbar_thickness / 2.0;
}

Vec2 pixel_world(int row, int col, int res, const Vec2& jitter) {
  return {(col + 0.5) / res + jitter.x, (row + 0.5) / res + jitter.y};
}

}  // namespace

Scene sample_scene(uint64_t rng_seed, int n_objects, const WorldParams& params) {
  if (n_objects < 0 || n_objects > 8)
    throw config_error("sample_scene: n_objects must be in [0,8], got " +
                       std::to_string(n_objects));
  Rng rng(derive_seed(rng_seed, 0x5CE11Eull));
  Scene scene;
  scene.bin_min = params.bin_min;
  scene.bin_max = params.bin_max;
  scene.camera_jitter.x = rng.uniform(-params.jitter_max, params.jitter_max);
  scene.camera_jitter.y = rng.uniform(-params.jitter_max, params.jitter_max);

  // fit radius: circumradius used both for in-bin placement and for the
  // conservative pairwise gap test.
  auto fit_radius = [](const ObjectInstance& o) {
    return o.kind == ShapeKind::disc ? o.radius : std::hypot(o.half_w, o.half_h);
  };

  for (int k = 0; k < n_objects; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_place_tries; ++attempt) {
      ObjectInstance o;
      o.kind = rng.bernoulli(params.box_probability) ? ShapeKind::box : ShapeKind::disc;
      if (o.kind == ShapeKind::disc) {
        o.radius = rng.uniform(params.object_min_size, params.object_max_size);
      } else {
        o.half_w = rng.uniform(params.object_min_size, params.object_max_size);
        o.half_h = rng.uniform(params.object_min_size, params.object_max_size);
        o.orientation = rng.uniform(0.0, kPi);
      }
      o.intensity = rng.uniform(params.intensity_min, params.intensity_max);
      double fr = fit_radius(o);
      double lo = params.bin_min + fr, hi = params.bin_max - fr;
      if (lo >= hi)
        throw config_error("sample_scene: object does not fit the bin");
      o.center.x = rng.uniform(lo, hi);
      o.center.y = rng.uniform(lo, hi);
      bool ok = true;
      for (const auto& other : scene.objects) {
        double dx = o.center.x - other.center.x, dy = o.center.y - other.center.y;
        double gap = std::hypot(dx, dy) - fr - fit_radius(other);
        if (gap < params.overlap_gap) {
          ok = false;
          break;
        }
      }
      if (ok) {
        scene.objects.push_back(o);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw config_error("sample_scene: placement failed after " +
                         std::to_string(params.max_place_tries) +
                         " tries; requested scene is too dense");
  }
  return scene;
}

std::pair<Vec2, Vec2> fingertips(const GraspCommand& c) {
  GraspFrame f = frame_of(c);
  Vec2 f1 = {f.g.x + f.half_ap * f.u.x, f.g.y + f.half_ap * f.u.y};
  Vec2 f2 = {f.g.x - f.half_ap * f.u.x, f.g.y - f.half_ap * f.u.y};
  return {f1, f2};
}

GraspOutcome grasp_outcome(const Scene& scene, const GraspCommand& c,
                           const WorldParams& params) {
  return analyze_grasp(scene, c, params).outcome;
}

GraspDebug grasp_debug(const Scene& scene, const GraspCommand& c, const WorldParams& params) {
  GraspAnalysis a = analyze_grasp(scene, c, params);
  GraspDebug d;
  d.outcome = a.outcome;
  d.focus_object = a.focus_object;
  if (a.focus_object >= 0) {
    GraspFrame f = frame_of(c);
    const ObjectInstance& obj = scene.objects[size_t(a.focus_object)];
    double lo, hi;
    if (axis_interval(obj, f, lo, hi)) d.extent = hi - lo;
    d.centroid_offset = std::fabs(dot(sub(obj.center, f.g), f.v));
  }
  return d;
}

bool raster_grasp_oracle(const Scene& scene, const GraspCommand& c, int resolution,
                         const WorldParams& params) {
  return raster_grasp_trace(scene, c, resolution, params).result;
}

RasterTrace raster_grasp_trace(const Scene& scene, const GraspCommand& c, int resolution,
                               const WorldParams& params) {
  if (resolution < 128)
    throw std::invalid_argument("raster_grasp_oracle: resolution must be >= 128");

  // Brute-force replica of the grasp rule by dense sampling along the
  // closing axis. Each finger starts exactly at its tip and marches inward
  // one pixel (1/resolution) at a time; within a step, occupancy is probed
  // at 8 sub-samples so that thin slivers wider than h/8 cannot slip
  // between probes. Marching in the grasp-aligned frame keeps the only
  // discretized quantity the position along the axis, so any residual
  // disagreement with the analytic rule is an extent-vs-aperture tangency.
  GraspFrame f = frame_of(c);
  double h = 1.0 / resolution;
  constexpr int kSub = 8;

  auto probe = [&](double t) -> int {
    Vec2 w = {f.g.x + t * f.u.x, f.g.y + t * f.u.y};
    for (size_t i = 0; i < scene.objects.size(); ++i)
      if (point_in_object(w, scene.objects[i])) return int(i + 1);
    return 0;
  };

  RasterTrace out;

  // Fingertips must start clear.
  if (probe(f.half_ap) != 0 || probe(-f.half_ap) != 0) {
    out.stage = RasterStage::initial_overlap;
    return out;
  }

  // dir = -1: finger 1 closing downward from +a/2; dir = +1: finger 2
  // closing upward from -a/2.
  auto march = [&](double start, double limit, double dir, int& id, double& t_contact) {
    id = 0;
    int steps = int(std::ceil((2.0 * f.half_ap) / h)) + 1;
    for (int m = 1; m <= steps; ++m) {
      double cell_far = start + dir * m * h;
      bool past_limit = dir < 0 ? cell_far < limit : cell_far > limit;
      for (int k = 1; k <= kSub; ++k) {
        double t = start + dir * ((m - 1) + double(k) / kSub) * h;
        if (dir < 0 ? t < limit : t > limit) break;
        int hit = probe(t);
        if (hit != 0) {
          id = hit;
          t_contact = t;
          return;
        }
      }
      if (past_limit) return;
    }
  };

  int id1 = 0, id2 = 0;
  double t1 = 0.0, t2 = 0.0;
  march(f.half_ap, -f.half_ap, -1.0, id1, t1);
  march(-f.half_ap, f.half_ap, +1.0, id2, t2);

  out.id1 = id1;
  out.id2 = id2;
  if (id1 == 0 || id2 == 0) {
    out.stage = RasterStage::no_contact;
    return out;
  }
  if (id1 != id2) {
    out.stage = RasterStage::different_ids;
    return out;
  }
  out.gap = t1 - t2;
  if (!(t1 - t2 > 0.0)) {
    out.stage = RasterStage::nonpositive_gap;
    return out;
  }

  // Pad alignment: the contacted object's centroid must sit within the pad
  // half-length of the axis. Disc and box centroids are their centre fields
  // by definition, so both routes use the exact value.
  const ObjectInstance& obj = scene.objects[size_t(id1 - 1)];
  double offset = std::fabs(dot(sub(obj.center, f.g), f.v));
  if (offset > params.pad_half_len) {
    out.stage = RasterStage::offset_fail;
    return out;
  }
  out.result = true;
  return out;
}

Observation render_before(const Scene& scene, int resolution, const WorldParams& params) {
  Observation img;
  img.h = img.w = resolution;
  img.pixels.assign(size_t(resolution) * size_t(resolution), float(params.background));
  for (int r = 0; r < resolution; ++r)
    for (int c = 0; c < resolution; ++c) {
      Vec2 w = pixel_world(r, c, resolution, scene.camera_jitter);
      float val = float(params.background);
      if (in_wall(w, params)) val = float(params.wall_intensity);
      for (const auto& o : scene.objects)
        if (point_in_object(w, o)) {
          val = float(o.intensity);
          break;
        }
      img.at(r, c) = val;
    }
  return img;
}

Observation render_during(const Scene& scene, const GraspCommand& c, int resolution,
                          const WorldParams& params) {
  Observation img = render_before(scene, resolution, params);
  GraspFrame f = frame_of(c);
  for (int r = 0; r < resolution; ++r)
    for (int col = 0; col < resolution; ++col) {
      Vec2 w = pixel_world(r, col, resolution, scene.camera_jitter);
      if (sprite_contains(w, f, params)) img.at(r, col) = float(params.gripper_intensity);
    }
  return img;
}

Observation render_gripper_mask(const GraspCommand& c, const Vec2& jitter, int resolution,
                                const WorldParams& params) {
  Observation img;
  img.h = img.w = resolution;
  img.pixels.assign(size_t(resolution) * size_t(resolution), 0.0f);
  GraspFrame f = frame_of(c);
  for (int r = 0; r < resolution; ++r)
    for (int col = 0; col < resolution; ++col) {
      Vec2 w = pixel_world(r, col, resolution, jitter);
      if (sprite_contains(w, f, params)) img.at(r, col) = 1.0f;
    }
  return img;
}

double occlusion_fraction(const Scene& scene, const GraspCommand& c, int resolution,
                          const WorldParams& params) {
  GraspAnalysis a = analyze_grasp(scene, c, params);
  // Only a contacted object can be occluded; centroid/extent failures are
  // classified as miss and by contract report 0.
  if (a.outcome.reason == GraspReason::miss || a.focus_object < 0) return 0.0;
  const ObjectInstance& obj = scene.objects[size_t(a.focus_object)];
  GraspFrame f = frame_of(c);
  int64_t total = 0, covered = 0;
  for (int r = 0; r < resolution; ++r)
    for (int col = 0; col < resolution; ++col) {
      Vec2 w = pixel_world(r, col, resolution, scene.camera_jitter);
      if (!point_in_object(w, obj)) continue;
      ++total;
      if (sprite_contains(w, f, params)) ++covered;
    }
  if (total == 0) return 0.0;
  return double(covered) / double(total);
}

GraspCommand sample_command(Rng& rng, const Scene& scene, const WorldParams& params) {
  double margin = params.pad_half_len + 0.01;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GraspCommand c;
    c.theta = rng.uniform(-kPi / 2.0, kPi / 2.0);
    c.aperture = rng.uniform(params.aperture_min, params.aperture_max);
    if (!scene.objects.empty() && rng.uniform() < params.object_bias) {
      // Aim near an object, with the noise expressed in the grasp frame:
      // along the closing axis up to bias_radius, across it up to roughly
      // the pad reach. Misses and near-misses stay plentiful while clean
      // grasps stop being vanishingly rare.
      const auto& o = scene.objects[size_t(rng.uniform_int(scene.objects.size()))];
      Vec2 u = {-std::sin(c.theta), std::cos(c.theta)};
      Vec2 v = {std::cos(c.theta), std::sin(c.theta)};
      double dt = rng.uniform(-params.object_bias_radius, params.object_bias_radius);
      double ds = rng.uniform(-(params.pad_half_len + 0.02), params.pad_half_len + 0.02);
      c.x = std::clamp(o.center.x + dt * u.x + ds * v.x, params.bin_min, params.bin_max);
      c.y = std::clamp(o.center.y + dt * u.y + ds * v.y, params.bin_min, params.bin_max);
    } else {
      c.x = rng.uniform(params.bin_min, params.bin_max);
      c.y = rng.uniform(params.bin_min, params.bin_max);
    }
    auto [f1, f2] = fingertips(c);
    bool ok = true;
    for (const Vec2& t : {f1, f2})
      if (t.x < margin || t.x > 1.0 - margin || t.y < margin || t.y > 1.0 - margin) ok = false;
    if (ok) return c;
  }
  throw numeric_error("sample_command: no in-frame command found");
}

}  // namespace gs::worldsim
