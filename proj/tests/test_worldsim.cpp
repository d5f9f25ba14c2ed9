#include <doctest.h>

#include <cmath>

#include "graspsight/dataio.hpp"
#include "graspsight/worldsim.hpp"

using namespace gs::worldsim;
using gs::Rng;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Exact boundary distance for the pairwise-gap oracle: discs analytically,
// boxes by dense boundary sampling.
double boundary_distance(const ObjectInstance& a, const ObjectInstance& b) {
  auto sample_boundary = [](const ObjectInstance& o, int n, std::vector<Vec2>& out) {
    if (o.kind == ShapeKind::disc) {
      for (int i = 0; i < n; ++i) {
        double ang = 2.0 * kPi * i / n;
        out.push_back({o.center.x + o.radius * std::cos(ang),
                       o.center.y + o.radius * std::sin(ang)});
      }
    } else {
      double ce = std::cos(o.orientation), se = std::sin(o.orientation);
      for (int i = 0; i < n; ++i) {
        double f = -1.0 + 2.0 * i / (n - 1.0);
        for (auto [p, q] : {std::pair{f * o.half_w, o.half_h},
                            std::pair{f * o.half_w, -o.half_h},
                            std::pair{o.half_w, f * o.half_h},
                            std::pair{-o.half_w, f * o.half_h}}) {
          out.push_back({o.center.x + p * ce - q * se, o.center.y + p * se + q * ce});
        }
      }
    }
  };
  if (a.kind == ShapeKind::disc && b.kind == ShapeKind::disc) {
    double d = std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
    return d - a.radius - b.radius;
  }
  std::vector<Vec2> pa, pb;
  sample_boundary(a, 256, pa);
  sample_boundary(b, 256, pb);
  double best = 1e9;
  for (const auto& u : pa)
    for (const auto& v : pb) best = std::min(best, std::hypot(u.x - v.x, u.y - v.y));
  return best;
}

GraspCommand rotate_command(const GraspCommand& c, double phi, double cx, double cy) {
  double co = std::cos(phi), si = std::sin(phi);
  GraspCommand out = c;
  out.x = cx + (c.x - cx) * co - (c.y - cy) * si;
  out.y = cy + (c.x - cx) * si + (c.y - cy) * co;
  double th = c.theta + phi;
  while (th >= kPi / 2.0) th -= kPi;
  while (th < -kPi / 2.0) th += kPi;
  out.theta = th;
  return out;
}

Scene rotate_scene(const Scene& s, double phi, double cx, double cy) {
  double co = std::cos(phi), si = std::sin(phi);
  Scene out = s;
  for (auto& o : out.objects) {
    double x = cx + (o.center.x - cx) * co - (o.center.y - cy) * si;
    double y = cy + (o.center.x - cx) * si + (o.center.y - cy) * co;
    o.center = {x, y};
  }
  return out;
}

Scene disc_scene(std::initializer_list<std::pair<Vec2, double>> discs,
                 const WorldParams& p) {
  Scene s;
  s.bin_min = p.bin_min;
  s.bin_max = p.bin_max;
  for (auto& [c, r] : discs) {
    ObjectInstance o;
    o.kind = ShapeKind::disc;
    o.center = c;
    o.radius = r;
    o.intensity = 0.7;
    s.objects.push_back(o);
  }
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("worldsim");

TEST_CASE("fingertips: axis-aligned, quarter-turn and separation cases") {
  auto [f1, f2] = fingertips({0.5, 0.5, 0.0, 0.2});
  CHECK(f1.x == doctest::Approx(0.5));
  CHECK(f1.y == doctest::Approx(0.6));
  CHECK(f2.x == doctest::Approx(0.5));
  CHECK(f2.y == doctest::Approx(0.4));

  auto [g1, g2] = fingertips({0.5, 0.5, kPi / 2.0, 0.1});
  CHECK(g1.x == doctest::Approx(0.45));
  CHECK(g1.y == doctest::Approx(0.5));
  CHECK(g2.x == doctest::Approx(0.55));
  CHECK(g2.y == doctest::Approx(0.5));

  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    GraspCommand c{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9),
                   rng.uniform(-kPi / 2, kPi / 2), rng.uniform(0.01, 0.25)};
    auto [a, b] = fingertips(c);
    CHECK(std::hypot(a.x - b.x, a.y - b.y) == doctest::Approx(c.aperture).epsilon(1e-12));
  }
}

TEST_CASE("sample_scene: empty, deterministic, and dense cases") {
  WorldParams p;
  Scene empty = sample_scene(7, 0, p);
  CHECK(empty.objects.empty());

  Scene a = sample_scene(7, 3, p);
  Scene b = sample_scene(7, 3, p);
  REQUIRE(a.objects.size() == 3);
  CHECK(a.camera_jitter.x == b.camera_jitter.x);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(a.objects[i].center.x == b.objects[i].center.x);
    CHECK(a.objects[i].center.y == b.objects[i].center.y);
    CHECK(a.objects[i].intensity == b.objects[i].intensity);
  }

  // 8 objects, all pairwise boundary gaps >= 0.005 via the exhaustive
  // pairwise distance oracle
  Scene dense = sample_scene(7, 8, p);
  REQUIRE(dense.objects.size() == 8);
  for (size_t i = 0; i < 8; ++i)
    for (size_t j = i + 1; j < 8; ++j)
      CHECK(boundary_distance(dense.objects[i], dense.objects[j]) >= 0.005 - 1e-6);
}

TEST_CASE("grasp_outcome trivial cases") {
  WorldParams p;
  Scene empty = disc_scene({}, p);
  GraspCommand c{0.5, 0.5, 0.0, 0.2};
  GraspOutcome o = grasp_outcome(empty, c, p);
  CHECK_FALSE(o.success);
  CHECK(o.reason == GraspReason::miss);
  CHECK_FALSE(o.grasped_index.has_value());

  Scene one = disc_scene({{{0.5, 0.5}, 0.05}}, p);
  o = grasp_outcome(one, c, p);
  CHECK(o.success);
  CHECK(o.reason == GraspReason::ok);
  CHECK(o.grasped_index == 0);

  o = grasp_outcome(one, {0.5, 0.5, 0.0, 0.08}, p);
  CHECK_FALSE(o.success);
  CHECK(o.reason == GraspReason::collision);

  // two discs straddling the fingertip segment -> multi_contact, confirmed
  // by the raster oracle
  Scene two = disc_scene({{{0.5, 0.56}, 0.04}, {{0.5, 0.44}, 0.04}}, p);
  o = grasp_outcome(two, c, p);
  CHECK_FALSE(o.success);
  CHECK(o.reason == GraspReason::multi_contact);
  CHECK_FALSE(raster_grasp_oracle(two, c, 256, p));
}

TEST_CASE("raster oracle trivial cases") {
  WorldParams p;
  Scene empty = disc_scene({}, p);
  CHECK_FALSE(raster_grasp_oracle(empty, {0.5, 0.5, 0.0, 0.2}, 256, p));
  Scene one = disc_scene({{{0.5, 0.5}, 0.05}}, p);
  CHECK(raster_grasp_oracle(one, {0.5, 0.5, 0.0, 0.2}, 256, p));
  CHECK_THROWS_AS(raster_grasp_oracle(one, {0.5, 0.5, 0.0, 0.2}, 64, p),
                  std::invalid_argument);
}

TEST_CASE("oracle agreement on 200 sampled pairs") {
  // Smaller in-loop version of the acceptance sweep.
  WorldParams p;
  int agree = 0;
  for (int i = 0; i < 200; ++i) {
    auto [scene, cmd] = gs::dataio::sample_record_world(1234, i, p);
    bool a = grasp_outcome(scene, cmd, p).success;
    bool b = raster_grasp_oracle(scene, cmd, 256, p);
    if (a == b) ++agree;
  }
  CHECK(agree >= 198);
}

TEST_CASE("rotation equivariance for disc scenes") {
  WorldParams p;
  double cx = (p.bin_min + p.bin_max) / 2.0, cy = cx;
  Rng rng(31);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    // discs only; keep everything well inside so rotations stay in-bin
    Scene s = disc_scene({}, p);
    int n = 1 + int(rng.uniform_int(3));
    for (int i = 0; i < n; ++i) {
      ObjectInstance o;
      o.kind = ShapeKind::disc;
      o.radius = rng.uniform(0.03, 0.06);
      double lim = 0.18;
      o.center = {cx + rng.uniform(-lim, lim), cy + rng.uniform(-lim, lim)};
      o.intensity = 0.7;
      s.objects.push_back(o);
    }
    GraspCommand c{cx + rng.uniform(-0.15, 0.15), cy + rng.uniform(-0.15, 0.15),
                   rng.uniform(-kPi / 2, kPi / 2), rng.uniform(0.16, 0.25)};
    bool base = grasp_outcome(s, c, p).success;
    for (double phi : {kPi / 2, kPi, 3 * kPi / 2}) {
      Scene rs = rotate_scene(s, phi, cx, cy);
      GraspCommand rc = rotate_command(c, phi, cx, cy);
      CHECK(grasp_outcome(rs, rc, p).success == base);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("render_before: walls only for empty scene, deterministic") {
  WorldParams p;
  Scene s = sample_scene(3, 0, p);
  Observation img = render_before(s, 64, p);
  REQUIRE(img.h == 64);
  REQUIRE(img.w == 64);
  bool saw_wall = false;
  for (float v : img.pixels) {
    bool bg = v == doctest::Approx(float(p.background));
    bool wall = v == doctest::Approx(float(p.wall_intensity));
    CHECK((bg || wall));
    saw_wall = saw_wall || wall;
  }
  CHECK(saw_wall);

  Observation img2 = render_before(s, 64, p);
  CHECK(img.pixels == img2.pixels);
}

TEST_CASE("render_before: disc pixel count matches its area") {
  WorldParams p;
  p.jitter_max = 0.0;
  Scene s = disc_scene({{{0.5, 0.5}, 0.08}}, p);
  int res = 128;
  Observation img = render_before(s, res, p);
  int count = 0;
  for (float v : img.pixels)
    if (v == doctest::Approx(0.7f)) ++count;
  double expected = kPi * 0.08 * 0.08 * res * res;
  CHECK(std::fabs(count - expected) / expected < 0.10);
}

TEST_CASE("render_during differs from render_before only inside the sprite") {
  WorldParams p;
  Scene s = sample_scene(11, 4, p);
  GraspCommand c{0.5, 0.5, 0.4, 0.2};
  Observation before = render_before(s, 64, p);
  Observation during = render_during(s, c, 64, p);
  Observation mask = render_gripper_mask(c, s.camera_jitter, 64, p);
  int sprite_px = 0;
  for (int i = 0; i < 64 * 64; ++i) {
    if (mask.pixels[size_t(i)] > 0.5f) {
      CHECK(during.pixels[size_t(i)] == doctest::Approx(float(p.gripper_intensity)));
      ++sprite_px;
    } else {
      CHECK(during.pixels[size_t(i)] == before.pixels[size_t(i)]);
    }
  }
  CHECK(sprite_px > 0);

  Observation during2 = render_during(s, c, 64, p);
  CHECK(during.pixels == during2.pixels);
}

TEST_CASE("sprite centroid maps back to the command position within a pixel") {
  WorldParams p;
  Scene s = sample_scene(19, 0, p);
  GraspCommand c{0.45, 0.55, -0.3, 0.2};
  int res = 64;
  Observation mask = render_gripper_mask(c, s.camera_jitter, res, p);
  // The sprite is symmetric about the grasp centre, so its pixel centroid
  // inverts the render transform.
  double sx = 0, sy = 0;
  int n = 0;
  for (int r = 0; r < res; ++r)
    for (int col = 0; col < res; ++col)
      if (mask.at(r, col) > 0.5f) {
        sx += (col + 0.5) / res;
        sy += (r + 0.5) / res;
        ++n;
      }
  REQUIRE(n > 0);
  double wx = sx / n + s.camera_jitter.x;
  double wy = sy / n + s.camera_jitter.y;
  CHECK(std::fabs(wx - c.x) < 1.0 / res);
  CHECK(std::fabs(wy - c.y) < 1.0 / res);
}

TEST_CASE("occlusion_fraction: contract cases") {
  WorldParams p;
  p.jitter_max = 0.0;
  // gripper far from the lone object -> 0
  Scene s = disc_scene({{{0.3, 0.3}, 0.05}}, p);
  Scene far = s;
  far.camera_jitter = {0, 0};
  CHECK(occlusion_fraction(far, {0.7, 0.7, 0.0, 0.2}, 128, p) == 0.0);

  // widened crossbar drawn fully over a small disc -> >= 0.9
  WorldParams wide = p;
  wide.crossbar_thickness = 0.08;
  Scene tiny = disc_scene({{{0.5, 0.5}, 0.03}}, wide);
  tiny.camera_jitter = {0, 0};
  double occ = occlusion_fraction(tiny, {0.5, 0.5, 0.0, 0.2}, 256, wide);
  CHECK(occ >= 0.9);

  // always within [0,1]; zero whenever the reason is miss
  Rng rng(77);
  for (int i = 0; i < 100; ++i) {
    auto [scene, cmd] = gs::dataio::sample_record_world(555, i, p);
    double v = occlusion_fraction(scene, cmd, 64, p);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (grasp_outcome(scene, cmd, p).reason == GraspReason::miss) CHECK(v == 0.0);
  }
}

TEST_CASE("sample_scene rejects over-dense requests") {
  WorldParams p;
  p.max_place_tries = 10;
  p.object_min_size = 0.095;
  p.object_max_size = 0.099;
  p.box_probability = 0.0;
  // 8 near-maximal discs cannot fit a small bin with only 10 tries each
  p.bin_min = 0.35;
  p.bin_max = 0.65;
  CHECK_THROWS_AS(sample_scene(1, 8, p), gs::config_error);
}

TEST_SUITE_END();
