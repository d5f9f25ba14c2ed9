#pragma once

// Training loops, evaluation and the three-stage comparison harness. Every
// run is a pure function of (dataset digest, config, seed): batch order,
// augmentation, init and optimizer state all derive from explicit seeds.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspsight/dataio.hpp"
#include "graspsight/models.hpp"

namespace gs::trainbench {

enum class InputKind { before_command, during, generated };

struct TrainConfig {
  int epochs = 5;
  int batch_size = 64;
  double learning_rate = 1e-3;
  uint64_t seed = 1;
  bool augment = false;
  int early_stop_patience = 4;
  double occlusion_tau = 0.25;
};

struct EvalReport {
  double accuracy = 0.0;
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  int64_t n = 0;
};

// Hallucinated during-images aligned by record index; empty slots for
// records that were never generated.
struct GeneratedImages {
  int image_h = 0;
  int image_w = 0;
  std::vector<std::vector<uint8_t>> images;
};

struct ClassifierHistory {
  std::vector<double> train_loss;  // per-epoch median batch loss
  std::vector<EvalReport> val_reports;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
};

struct PredictiveHistory {
  std::vector<double> train_loss;  // per-epoch median batch loss
  std::vector<double> val_mse;
  int best_epoch = -1;
  double best_val_mse = 0.0;
};

// Trains with Adam on mean BCE, evaluates the validation split each epoch,
// restores the best-validation parameters, early-stops on patience.
// `generated` backs InputKind::generated and may be null otherwise.
ClassifierHistory train_classifier(models::Network& net, const dataio::RecordSet& records,
                                   const std::vector<int64_t>& train_idx,
                                   const std::vector<int64_t>& val_idx, InputKind kind,
                                   const TrainConfig& cfg,
                                   const worldsim::WorldParams& world,
                                   const GeneratedImages* generated = nullptr);

PredictiveHistory train_predictive(models::Network& net, const dataio::RecordSet& records,
                                   const std::vector<int64_t>& train_idx,
                                   const std::vector<int64_t>& val_idx,
                                   const TrainConfig& cfg,
                                   const worldsim::WorldParams& world);

// Threshold 0.5 on the sigmoid output; exactly 0.5 counts as predicting
// failure. Confusion counts are recounted from per-sample predictions as an
// internal double-entry check.
EvalReport evaluate(models::Network& net, const dataio::RecordSet& records,
                    const std::vector<int64_t>& idx, InputKind kind,
                    const worldsim::WorldParams& world,
                    const GeneratedImages* generated = nullptr);

EvalReport evaluate_pipeline(models::PipelineModel& model, const dataio::RecordSet& records,
                             const std::vector<int64_t>& idx,
                             const worldsim::WorldParams& world);

// Runs the frozen predictive model over the given records and quantizes the
// hallucinations to u8.
GeneratedImages hallucinate(models::Network& predictive, const dataio::RecordSet& records,
                            const std::vector<int64_t>& idx,
                            const worldsim::WorldParams& world, int batch_size = 128);

// The record subset the surrogate experiment is allowed to see.
std::vector<int64_t> surrogate_training_indices(const dataio::RecordSet& records, double tau);

struct ExperimentResult {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct ComparisonReport {
  ExperimentResult model_free;
  ExperimentResult surrogate;
  ExperimentResult pipeline;
  uint64_t seed = 0;
  uint64_t dataset_digest = 0;
  double wall_seconds = 0.0;
};

struct ComparisonConfig {
  TrainConfig model_free;
  TrainConfig surrogate;
  TrainConfig predictive;
  TrainConfig pipeline_estimator;
  double train_fraction = 0.9;
  bool estimator_mix_real = false;  // also feed real during-images to the
                                    // pipeline estimator (off by default)
  worldsim::WorldParams world;
};

struct ComparisonArtifacts {
  ComparisonReport report;
  models::Network model_free;
  models::Network surrogate;
  models::Network predictive;
  models::Network pipeline_estimator;
};

// One full three-stage run under a single seed: model-free, occlusion-
// filtered surrogate, then predictive + estimator trained on hallucinated
// images and evaluated end-to-end from (before, command) only.
ComparisonArtifacts run_comparison(const dataio::Dataset& dataset,
                                   const ComparisonConfig& cfg, uint64_t seed);

// n rows of [before | predicted | during] as one grayscale image.
worldsim::Observation render_prediction_grid(models::Network& predictive,
                                             const dataio::RecordSet& records,
                                             const std::vector<int64_t>& idx, int n,
                                             const worldsim::WorldParams& world);

// Binary PGM (P5, maxval 255).
void write_pgm(const worldsim::Observation& img, const std::string& path);
worldsim::Observation read_pgm(const std::string& path);

nlohmann::json report_to_json(const ComparisonReport& r);
nlohmann::json eval_to_json(const EvalReport& r);

// Aligned-text table over per-seed reports plus the per-field median row.
std::string format_report_table(const std::vector<ComparisonReport>& reports);
ComparisonReport median_report(const std::vector<ComparisonReport>& reports);

}  // namespace gs::trainbench
