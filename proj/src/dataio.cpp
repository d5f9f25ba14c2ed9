#include "graspsight/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "graspsight/errors.hpp"
#include "graspsight/parallel.hpp"
#include "graspsight/rng.hpp"

namespace gs::dataio {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'S', 'P'};
constexpr uint16_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put(std::FILE* f, const void* p, size_t n, const std::string& path) {
  if (std::fwrite(p, 1, n, f) != n) throw io_error("short write to " + path);
}

void get(std::FILE* f, void* p, size_t n, const std::string& path) {
  if (std::fread(p, 1, n, f) != n) throw io_error("truncated record file: " + path);
}

void hash_f64(uint64_t& h, double v) {
  h = fnv1a(&v, sizeof(v), h);
}

void hash_i64(uint64_t& h, int64_t v) {
  h = fnv1a(&v, sizeof(v), h);
}

}  // namespace

uint64_t world_params_digest(const worldsim::WorldParams& p) {
  uint64_t h = 0xCBF29CE484222325ull;
  hash_f64(h, p.bin_min);
  hash_f64(h, p.bin_max);
  hash_i64(h, p.n_objects_min);
  hash_i64(h, p.n_objects_max);
  hash_f64(h, p.object_min_size);
  hash_f64(h, p.object_max_size);
  hash_f64(h, p.box_probability);
  hash_f64(h, p.intensity_min);
  hash_f64(h, p.intensity_max);
  hash_f64(h, p.jitter_max);
  hash_f64(h, p.pad_half_len);
  hash_f64(h, p.aperture_min);
  hash_f64(h, p.aperture_max);
  hash_f64(h, p.object_bias);
  hash_f64(h, p.object_bias_radius);
  hash_f64(h, p.overlap_gap);
  hash_i64(h, p.max_place_tries);
  hash_f64(h, p.background);
  hash_f64(h, p.wall_intensity);
  hash_f64(h, p.wall_thickness);
  hash_f64(h, p.finger_thickness);
  hash_f64(h, p.crossbar_thickness);
  hash_f64(h, p.gripper_intensity);
  return h;
}

uint64_t dataset_digest(const DatasetManifest& m) {
  uint64_t h = 0xCBF29CE484222325ull;
  hash_i64(h, m.count);
  hash_i64(h, m.image_h);
  hash_i64(h, m.image_w);
  hash_i64(h, int64_t(m.seed));
  hash_i64(h, int64_t(m.world_params_digest));
  hash_i64(h, m.positive_count);
  return h;
}

uint8_t unit_to_u8(float v) {
  float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return uint8_t(std::lround(c * 255.0f));
}

void flip_image_u8(const uint8_t* src, int h, int w, uint8_t* dst) {
  for (int r = 0; r < h; ++r) {
    const uint8_t* s = src + size_t(r) * w;
    uint8_t* d = dst + size_t(r) * w;
    for (int c = 0; c < w; ++c) d[c] = s[w - 1 - c];
  }
}

std::pair<worldsim::Scene, worldsim::GraspCommand> sample_record_world(
    uint64_t seed, int64_t index, const worldsim::WorldParams& params) {
  uint64_t rec_seed = derive_seed(seed, uint64_t(index));
  Rng rng(derive_seed(rec_seed, 1));
  int span = params.n_objects_max - params.n_objects_min + 1;
  int n = params.n_objects_min + int(rng.uniform_int(uint64_t(span)));
  worldsim::Scene scene = worldsim::sample_scene(derive_seed(rec_seed, 2), n, params);
  Rng cmd_rng(derive_seed(rec_seed, 3));
  worldsim::GraspCommand cmd = worldsim::sample_command(cmd_rng, scene, params);
  return {std::move(scene), cmd};
}

GraspRecord make_record(const worldsim::Scene& scene, const worldsim::GraspCommand& cmd,
                        int image_size, const worldsim::WorldParams& params) {
  GraspRecord rec;
  rec.x = float(cmd.x);
  rec.y = float(cmd.y);
  rec.theta = float(cmd.theta);
  rec.aperture = float(cmd.aperture);
  rec.label = worldsim::grasp_outcome(scene, cmd, params).success ? 1 : 0;
  rec.occlusion = float(worldsim::occlusion_fraction(scene, cmd, image_size, params));
  worldsim::Observation before = worldsim::render_before(scene, image_size, params);
  worldsim::Observation during = worldsim::render_during(scene, cmd, image_size, params);
  rec.before.resize(before.pixels.size());
  rec.during.resize(during.pixels.size());
  for (size_t i = 0; i < before.pixels.size(); ++i) rec.before[i] = unit_to_u8(before.pixels[i]);
  for (size_t i = 0; i < during.pixels.size(); ++i) rec.during[i] = unit_to_u8(during.pixels[i]);
  return rec;
}

DatasetManifest generate_dataset(const worldsim::WorldParams& params, const GenParams& gen,
                                 const std::string& out_dir) {
  if (gen.count < 0) throw config_error("generate_dataset: count must be >= 0");
  if (gen.image_size < 16) throw config_error("generate_dataset: image_size must be >= 16");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  RecordSet set;
  set.image_h = set.image_w = gen.image_size;
  set.records.resize(size_t(gen.count));
  // Record production is index-keyed and order-independent; the writer below
  // serializes in index order.
  parallel_for(gen.count, [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) {
      auto [scene, cmd] = sample_record_world(gen.seed, i, params);
      set.records[size_t(i)] = make_record(scene, cmd, gen.image_size, params);
    }
  });

  DatasetManifest m;
  m.count = gen.count;
  m.image_h = m.image_w = gen.image_size;
  m.seed = gen.seed;
  m.world_params_digest = world_params_digest(params);
  m.positive_count = 0;
  for (const auto& r : set.records) m.positive_count += r.label;
  if (!(gen.train_fraction > 0.0 && gen.train_fraction < 1.0))
    throw config_error("generate_dataset: train_fraction must be in (0,1)");
  m.split_boundary = int64_t(std::floor(gen.train_fraction * double(gen.count)));

  write_records(set, (std::filesystem::path(out_dir) / "records.bin").string());
  write_manifest(m, (std::filesystem::path(out_dir) / "manifest.json").string());
  return m;
}

int64_t write_records(const RecordSet& set, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw io_error("cannot open record file for writing: " + path);
  put(f.get(), kMagic, 4, path);
  uint16_t ver = kVersion, reserved = 0;
  put(f.get(), &ver, 2, path);
  put(f.get(), &reserved, 2, path);
  int64_t bytes = 8;
  size_t hw = size_t(set.image_h) * size_t(set.image_w);
  for (const auto& r : set.records) {
    if (r.before.size() != hw || r.during.size() != hw)
      throw io_error("write_records: record image size does not match the set dimensions");
    float cmd[4] = {r.x, r.y, r.theta, r.aperture};
    put(f.get(), cmd, 16, path);
    uint8_t lab = r.label, pad = 0;
    put(f.get(), &lab, 1, path);
    put(f.get(), &pad, 1, path);
    put(f.get(), &r.occlusion, 4, path);
    put(f.get(), r.before.data(), hw, path);
    put(f.get(), r.during.data(), hw, path);
    bytes += 22 + int64_t(2 * hw);
  }
  if (std::fflush(f.get()) != 0) throw io_error("flush failed for " + path);
  return bytes;
}

RecordSet read_records(const std::string& path, int image_h, int image_w) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw io_error("cannot open record file: " + path);
  char magic[4];
  get(f.get(), magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw io_error("record file magic mismatch in " + path);
  uint16_t ver = 0, reserved = 0;
  get(f.get(), &ver, 2, path);
  get(f.get(), &reserved, 2, path);
  if (ver != kVersion)
    throw io_error("unsupported record file version " + std::to_string(ver) + " in " + path);

  std::error_code ec;
  auto fsize = std::filesystem::file_size(path, ec);
  if (ec) throw io_error("cannot stat record file: " + path);
  size_t hw = size_t(image_h) * size_t(image_w);
  int64_t rec_size = 22 + int64_t(2 * hw);
  if ((int64_t(fsize) - 8) % rec_size != 0)
    throw io_error("truncated record file: " + path);
  int64_t count = (int64_t(fsize) - 8) / rec_size;

  RecordSet set;
  set.image_h = image_h;
  set.image_w = image_w;
  set.records.resize(size_t(count));
  for (auto& r : set.records) {
    float cmd[4];
    get(f.get(), cmd, 16, path);
    r.x = cmd[0];
    r.y = cmd[1];
    r.theta = cmd[2];
    r.aperture = cmd[3];
    uint8_t lab = 0, pad = 0;
    get(f.get(), &lab, 1, path);
    get(f.get(), &pad, 1, path);
    r.label = lab;
    get(f.get(), &r.occlusion, 4, path);
    r.before.resize(hw);
    r.during.resize(hw);
    get(f.get(), r.before.data(), hw, path);
    get(f.get(), r.during.data(), hw, path);
  }
  return set;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["count"] = m.count;
  j["image_h"] = m.image_h;
  j["image_w"] = m.image_w;
  j["seed"] = m.seed;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)m.world_params_digest);
  j["world_params_digest"] = std::string(buf);
  j["positive_count"] = m.positive_count;
  j["split_boundary"] = m.split_boundary;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open manifest for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw io_error("short write to " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed manifest " + path + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    m.count = j.at("count").get<int64_t>();
    m.image_h = j.at("image_h").get<int>();
    m.image_w = j.at("image_w").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.world_params_digest =
        std::stoull(j.at("world_params_digest").get<std::string>(), nullptr, 16);
    m.positive_count = j.at("positive_count").get<int64_t>();
    m.split_boundary = j.at("split_boundary").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error("manifest " + path + " is missing fields: " + e.what());
  }
  if (m.format_version != 1)
    throw io_error("unsupported manifest format_version in " + path);
  if (m.count < 0 || m.positive_count > m.count || m.split_boundary < 0 ||
      m.split_boundary > m.count)
    throw io_error("manifest " + path + " has inconsistent counts");
  return m;
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset d;
  d.manifest = read_manifest((fs::path(dir) / "manifest.json").string());
  d.records =
      read_records((fs::path(dir) / "records.bin").string(), d.manifest.image_h,
                   d.manifest.image_w);
  if (d.records.count() != d.manifest.count)
    throw io_error("dataset " + dir + ": record count " + std::to_string(d.records.count()) +
                   " does not match manifest count " + std::to_string(d.manifest.count));
  return d;
}

std::pair<std::vector<int64_t>, std::vector<int64_t>> split(int64_t count,
                                                            double train_fraction,
                                                            uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw config_error("split: train_fraction must be in (0,1)");
  std::vector<int64_t> perm(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) perm[size_t(i)] = i;
  Rng rng(derive_seed(seed, 0x5B117ull));
  for (int64_t i = count - 1; i > 0; --i) {
    int64_t j = int64_t(rng.uniform_int(uint64_t(i + 1)));
    std::swap(perm[size_t(i)], perm[size_t(j)]);
  }
  int64_t boundary = int64_t(std::floor(train_fraction * double(count)));
  std::vector<int64_t> train(perm.begin(), perm.begin() + boundary);
  std::vector<int64_t> val(perm.begin() + boundary, perm.end());
  return {std::move(train), std::move(val)};
}

std::pair<std::vector<int64_t>, std::vector<int64_t>> split(const DatasetManifest& manifest,
                                                            double train_fraction,
                                                            uint64_t seed) {
  return split(manifest.count, train_fraction, seed);
}

RecordSet filter_by_occlusion(const RecordSet& set, double tau) {
  if (tau < 0.0 || tau > 1.0) throw config_error("filter_by_occlusion: tau must be in [0,1]");
  RecordSet out;
  out.image_h = set.image_h;
  out.image_w = set.image_w;
  for (const auto& r : set.records)
    if (double(r.occlusion) <= tau) out.records.push_back(r);
  return out;
}

std::vector<int64_t> occlusion_filtered_indices(const RecordSet& set, double tau) {
  if (tau < 0.0 || tau > 1.0)
    throw config_error("occlusion_filtered_indices: tau must be in [0,1]");
  std::vector<int64_t> idx;
  for (int64_t i = 0; i < set.count(); ++i)
    if (double(set.records[size_t(i)].occlusion) <= tau) idx.push_back(i);
  return idx;
}

GraspRecord augment_record(const GraspRecord& rec, int image_h, int image_w) {
  GraspRecord out = rec;
  out.x = 1.0f - rec.x;
  out.theta = -rec.theta;
  if (out.theta >= float(3.14159265358979323846 / 2.0))
    out.theta -= float(3.14159265358979323846);
  flip_image_u8(rec.before.data(), image_h, image_w, out.before.data());
  flip_image_u8(rec.during.data(), image_h, image_w, out.during.data());
  return out;
}

BatchPlan plan_batches(const std::vector<int64_t>& indices, const BatchSpec& spec) {
  if (indices.empty()) throw config_error("plan_batches: no records");
  if (spec.batch_size < 1) throw config_error("plan_batches: batch_size must be >= 1");
  BatchPlan plan;
  plan.batch_size = spec.batch_size;
  plan.order = indices;
  Rng rng(derive_seed(spec.shuffle_seed, 0xBA7C4ull));
  for (int64_t i = int64_t(plan.order.size()) - 1; i > 0; --i) {
    int64_t j = int64_t(rng.uniform_int(uint64_t(i + 1)));
    std::swap(plan.order[size_t(i)], plan.order[size_t(j)]);
  }
  plan.flip.assign(plan.order.size(), 0);
  if (spec.augment) {
    Rng frng(derive_seed(spec.shuffle_seed, 0xF119ull));
    for (auto& f : plan.flip) f = frng.bernoulli(0.5) ? 1 : 0;
  }
  return plan;
}

Batch realize_batch(const RecordSet& set, const BatchPlan& plan, int batch_index) {
  auto [lo, hi] = plan.batch_range(batch_index);
  if (lo >= hi) throw config_error("realize_batch: batch index out of range");
  int n = int(hi - lo);
  int h = set.image_h, w = set.image_w;
  Batch b;
  b.before = tensornet::Tensor({n, 1, h, w});
  b.during = tensornet::Tensor({n, 1, h, w});
  b.command = tensornet::Tensor({n, 4});
  b.labels.resize(size_t(n));
  b.indices.resize(size_t(n));
  for (int i = 0; i < n; ++i) {
    int64_t src = plan.order[size_t(lo + i)];
    const GraspRecord* rec = &set.records[size_t(src)];
    GraspRecord flipped;
    if (plan.flip[size_t(lo + i)]) {
      flipped = augment_record(*rec, h, w);
      rec = &flipped;
    }
    b.indices[size_t(i)] = src;
    b.labels[size_t(i)] = float(rec->label);
    float* bp = b.before.ptr() + int64_t(i) * h * w;
    float* dp = b.during.ptr() + int64_t(i) * h * w;
    for (size_t k = 0; k < size_t(h) * size_t(w); ++k) {
      bp[k] = u8_to_unit(rec->before[k]);
      dp[k] = u8_to_unit(rec->during[k]);
    }
    float* cp = b.command.ptr() + int64_t(i) * 4;
    cp[0] = rec->x;
    cp[1] = rec->y;
    cp[2] = rec->theta;
    cp[3] = rec->aperture;
  }
  return b;
}

std::vector<Batch> batches(const RecordSet& set, const BatchSpec& spec) {
  std::vector<int64_t> all(size_t(set.count()));
  for (int64_t i = 0; i < set.count(); ++i) all[size_t(i)] = i;
  BatchPlan plan = plan_batches(all, spec);
  std::vector<Batch> out;
  out.reserve(size_t(plan.batch_count()));
  for (int b = 0; b < plan.batch_count(); ++b) out.push_back(realize_batch(set, plan, b));
  return out;
}

}  // namespace gs::dataio
