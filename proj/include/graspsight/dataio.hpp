#pragma once

// Self-supervised dataset generation and bit-exact storage. One record file
// per dataset plus a JSON manifest. Records hold quantized u8 images; the
// float fields are stored exactly as f32 so write/read roundtrips compare
// equal field by field.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "graspsight/tensor.hpp"
#include "graspsight/worldsim.hpp"

namespace gs::dataio {

struct GraspRecord {
  float x = 0, y = 0, theta = 0, aperture = 0;  // command, as stored
  uint8_t label = 0;
  float occlusion = 0;
  std::vector<uint8_t> before;  // H*W, round(pixel*255)
  std::vector<uint8_t> during;

  worldsim::GraspCommand command() const { return {x, y, theta, aperture}; }

  bool operator==(const GraspRecord&) const = default;
};

struct RecordSet {
  int image_h = 0;
  int image_w = 0;
  std::vector<GraspRecord> records;

  int64_t count() const { return int64_t(records.size()); }
};

struct DatasetManifest {
  int format_version = 1;
  int64_t count = 0;
  int image_h = 0;
  int image_w = 0;
  uint64_t seed = 0;
  uint64_t world_params_digest = 0;
  int64_t positive_count = 0;
  int64_t split_boundary = 0;
};

struct GenParams {
  int64_t count = 20000;
  uint64_t seed = 1;
  int image_size = 64;
  double train_fraction = 0.9;  // recorded as manifest.split_boundary
};

struct BatchSpec {
  int batch_size = 64;
  uint64_t shuffle_seed = 0;
  bool augment = false;
};

struct Dataset {
  DatasetManifest manifest;
  RecordSet records;
};

uint64_t world_params_digest(const worldsim::WorldParams& params);
uint64_t dataset_digest(const DatasetManifest& manifest);

// Scene + command that produced record `index` of a dataset generated with
// `seed`. Regeneration is how tests and tools recover per-record ground
// truth (jitter, object geometry) that the record file does not store.
std::pair<worldsim::Scene, worldsim::GraspCommand> sample_record_world(
    uint64_t seed, int64_t index, const worldsim::WorldParams& params);

GraspRecord make_record(const worldsim::Scene& scene, const worldsim::GraspCommand& cmd,
                        int image_size, const worldsim::WorldParams& params);

// Writes <out_dir>/records.bin and <out_dir>/manifest.json.
DatasetManifest generate_dataset(const worldsim::WorldParams& params, const GenParams& gen,
                                 const std::string& out_dir);

int64_t write_records(const RecordSet& set, const std::string& path);
RecordSet read_records(const std::string& path, int image_h, int image_w);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

Dataset load_dataset(const std::string& dir);

// Disjoint, exhaustive, seed-deterministic permutation split.
std::pair<std::vector<int64_t>, std::vector<int64_t>> split(int64_t count,
                                                            double train_fraction,
                                                            uint64_t seed);
std::pair<std::vector<int64_t>, std::vector<int64_t>> split(const DatasetManifest& manifest,
                                                            double train_fraction,
                                                            uint64_t seed);

// Retains exactly the records with occlusion <= tau.
RecordSet filter_by_occlusion(const RecordSet& set, double tau);
std::vector<int64_t> occlusion_filtered_indices(const RecordSet& set, double tau);

// Horizontal mirror about the image vertical centreline; command remapped
// x' = 1-x (== x_min+x_max-x for the symmetric bin), theta' = -theta.
// Involution; labels preserved.
GraspRecord augment_record(const GraspRecord& rec, int image_h, int image_w);

// Shuffle order plus per-record flip decisions. Realization is separate so
// training loops can materialize only the tensors they need.
struct BatchPlan {
  std::vector<int64_t> order;
  std::vector<uint8_t> flip;
  int batch_size = 1;

  int batch_count() const {
    return int((int64_t(order.size()) + batch_size - 1) / batch_size);
  }
  std::pair<int64_t, int64_t> batch_range(int b) const {
    int64_t lo = int64_t(b) * batch_size;
    int64_t hi = std::min<int64_t>(int64_t(order.size()), lo + batch_size);
    return {lo, hi};
  }
};

BatchPlan plan_batches(const std::vector<int64_t>& indices, const BatchSpec& spec);

struct Batch {
  tensornet::Tensor before;   // [N,1,H,W]
  tensornet::Tensor during;   // [N,1,H,W]
  tensornet::Tensor command;  // [N,4] raw (x,y,theta,aperture)
  std::vector<float> labels;
  std::vector<int64_t> indices;  // source record indices
};

Batch realize_batch(const RecordSet& set, const BatchPlan& plan, int batch_index);

std::vector<Batch> batches(const RecordSet& set, const BatchSpec& spec);

// Image decode helpers shared with the training loops.
inline float u8_to_unit(uint8_t v) { return float(v) * (1.0f / 255.0f); }
uint8_t unit_to_u8(float v);
void flip_image_u8(const uint8_t* src, int h, int w, uint8_t* dst);

}  // namespace gs::dataio
