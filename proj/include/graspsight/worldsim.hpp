#pragma once

// Deterministic planar grasping world. Scenes are sampled into a unit square
// with an axis-aligned bin; grasp labels come from an analytic antipodal
// rule, cross-checked by a pixel-marching raster oracle; observations are
// point-sampled grayscale rasters.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "graspsight/rng.hpp"

namespace gs::worldsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

enum class ShapeKind { disc, box };

struct ObjectInstance {
  ShapeKind kind = ShapeKind::disc;
  Vec2 center;
  double radius = 0.0;  // disc only
  double half_w = 0.0;  // box only
  double half_h = 0.0;
  double orientation = 0.0;  // box frame rotation, radians
  double intensity = 0.6;    // grayscale in [0.4, 0.9]
};

struct Scene {
  std::vector<ObjectInstance> objects;
  double bin_min = 0.0;  // interior square [bin_min, bin_max]^2
  double bin_max = 1.0;
  Vec2 camera_jitter;  // shared by every render of this scene
};

// Antipodal planar grasp: position, axis angle, fingertip separation.
struct GraspCommand {
  double x = 0.5;
  double y = 0.5;
  double theta = 0.0;  // [-pi/2, pi/2)
  double aperture = 0.2;
};

enum class GraspReason { miss, collision, multi_contact, ok };

struct GraspOutcome {
  bool success = false;
  std::optional<int> grasped_index;
  GraspReason reason = GraspReason::miss;
};

struct Observation {
  int h = 0;
  int w = 0;
  std::vector<float> pixels;  // row-major, values in [0,1]

  float at(int r, int c) const { return pixels[size_t(r) * w + c]; }
  float& at(int r, int c) { return pixels[size_t(r) * w + c]; }
};

struct WorldParams {
  double bin_min = 0.16;
  double bin_max = 0.84;
  int n_objects_min = 1;
  int n_objects_max = 6;
  double object_min_size = 0.030;
  double object_max_size = 0.065;
  double box_probability = 0.5;
  double intensity_min = 0.4;
  double intensity_max = 0.9;
  double jitter_max = 0.03;
  double pad_half_len = 0.04;  // finger pad half length, perpendicular to closing axis
  double aperture_min = 0.16;
  double aperture_max = 0.25;
  double object_bias = 0.75;  // fraction of command proposals aimed near an object
  double object_bias_radius = 0.08;
  double overlap_gap = 0.005;
  int max_place_tries = 1000;
  double background = 0.1;
  double wall_intensity = 0.35;
  double wall_thickness = 0.02;
  double finger_thickness = 0.02;
  double crossbar_thickness = 0.02;
  double gripper_intensity = 1.0;

  double bin_extent() const { return bin_max - bin_min; }
};

// Rejection-samples n non-overlapping objects (pairwise boundary gap >=
// overlap_gap) plus a per-scene camera jitter. Deterministic in the seed.
// Throws gs::config_error when a placement cannot be found.
Scene sample_scene(uint64_t rng_seed, int n_objects, const WorldParams& params);

// f1 = p + (a/2)(-sin t, cos t), f2 = p - (a/2)(-sin t, cos t).
std::pair<Vec2, Vec2> fingertips(const GraspCommand& c);

// Analytic label oracle. Success requires: pads start clear of every object,
// both pads first-contact the same single object while closing, that
// object's extent along the closing axis is positive and fits the aperture,
// and its centroid sits within the pad half-length of the axis.
GraspOutcome grasp_outcome(const Scene& scene, const GraspCommand& c, const WorldParams& params);

// Brute-force pixel-space replica of the same rule: rasterize the scene at
// `resolution`, march both pads inward one pixel at a time, and apply the
// contact/gap/centroid tests on the grid. Requires resolution >= 128.
bool raster_grasp_oracle(const Scene& scene, const GraspCommand& c, int resolution,
                         const WorldParams& params);

// Introspection for the oracle-equivalence analysis: which object the
// gripper interacts with, its extent along the closing axis and its
// centroid offset from the axis.
struct GraspDebug {
  GraspOutcome outcome;
  int focus_object = -1;
  double extent = -1.0;          // band extent of the focus object, unclipped
  double centroid_offset = -1.0;
};
GraspDebug grasp_debug(const Scene& scene, const GraspCommand& c, const WorldParams& params);

enum class RasterStage {
  ok,
  initial_overlap,
  no_contact,
  different_ids,
  nonpositive_gap,
  offset_fail,
};

struct RasterTrace {
  bool result = false;
  RasterStage stage = RasterStage::ok;
  int id1 = 0, id2 = 0;  // 1-based object ids at first contact
  double gap = 0.0;
};
RasterTrace raster_grasp_trace(const Scene& scene, const GraspCommand& c, int resolution,
                               const WorldParams& params);

Observation render_before(const Scene& scene, int resolution, const WorldParams& params);

// render_before composited with the gripper sprite: two finger pads at the
// commanded fingertip poses joined by a crossbar, drawn opaque.
Observation render_during(const Scene& scene, const GraspCommand& c, int resolution,
                          const WorldParams& params);

// Sprite footprint alone (1 inside, 0 outside), under the given jitter.
Observation render_gripper_mask(const GraspCommand& c, const Vec2& jitter, int resolution,
                                const WorldParams& params);

// Fraction of the contacted object's rendered pixels hidden by the sprite;
// 0 when no object is contacted.
double occlusion_fraction(const Scene& scene, const GraspCommand& c, int resolution,
                          const WorldParams& params);

// Command proposal used by dataset generation: a mixture of near-object and
// uniform-over-bin positions, uniform angle and aperture, rejected until the
// whole sprite fits the image frame.
GraspCommand sample_command(Rng& rng, const Scene& scene, const WorldParams& params);

}  // namespace gs::worldsim
