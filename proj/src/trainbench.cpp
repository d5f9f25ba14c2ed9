#include "graspsight/trainbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "graspsight/errors.hpp"
#include "graspsight/rng.hpp"

namespace gs::trainbench {

using dataio::BatchPlan;
using dataio::BatchSpec;
using dataio::RecordSet;
using models::Network;
using tensornet::Tensor;

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

BatchPlan identity_plan(const std::vector<int64_t>& idx, int batch_size) {
  BatchPlan plan;
  plan.order = idx;
  plan.flip.assign(idx.size(), 0);
  plan.batch_size = batch_size;
  return plan;
}

// Image + labels for one batch under InputKind::generated. Indices may live
// in a virtual space of size k*count (mixed-source training); record fields
// come from idx % count, the image from generated.images[idx].
struct GeneratedBatch {
  Tensor image;
  Tensor command;  // raw [N,4]
  std::vector<float> labels;
};

GeneratedBatch realize_generated(const RecordSet& records, const GeneratedImages& gen,
                                 const BatchPlan& plan, int batch_index) {
  auto [lo, hi] = plan.batch_range(batch_index);
  int n = int(hi - lo);
  int h = gen.image_h, w = gen.image_w;
  GeneratedBatch b;
  b.image = Tensor({n, 1, h, w});
  b.command = Tensor({n, 4});
  b.labels.resize(size_t(n));
  std::vector<uint8_t> flipped(size_t(h) * size_t(w));
  for (int i = 0; i < n; ++i) {
    int64_t vidx = plan.order[size_t(lo + i)];
    const auto& img = gen.images[size_t(vidx)];
    if (img.empty())
      throw config_error("generated image missing for record " + std::to_string(vidx));
    const dataio::GraspRecord& rec = records.records[size_t(vidx % records.count())];
    const uint8_t* src = img.data();
    if (plan.flip[size_t(lo + i)]) {
      dataio::flip_image_u8(img.data(), h, w, flipped.data());
      src = flipped.data();
    }
    float* dst = b.image.ptr() + int64_t(i) * h * w;
    for (size_t k = 0; k < size_t(h) * size_t(w); ++k) dst[k] = dataio::u8_to_unit(src[k]);
    b.labels[size_t(i)] = float(rec.label);
    float* cp = b.command.ptr() + int64_t(i) * 4;
    cp[0] = rec.x;
    cp[1] = rec.y;
    cp[2] = rec.theta;
    cp[3] = rec.aperture;
  }
  return b;
}

void check_kind(const Network& net, InputKind kind) {
  if (kind == InputKind::before_command) {
    if (net.arch != "modelfree_v1")
      throw shape_error("before_command input needs the model-free net, got " + net.arch);
  } else if (net.arch != "surrogate_v1") {
    throw shape_error("observation input needs the surrogate net, got " + net.arch);
  }
}

// Probabilities for one evaluation/training batch, no gradients.
Tensor batch_probs(Network& net, InputKind kind, const Tensor& image, const Tensor& rawcmd,
                   const worldsim::WorldParams& world) {
  models::FloatTape t;
  if (kind == InputKind::before_command) {
    Tensor cmd = models::encode_commands(rawcmd, world);
    return t.value(models::modelfree_forward(t, net, t.input(image), t.input(cmd)));
  }
  return t.value(models::surrogate_forward(t, net, t.input(image)));
}

std::vector<Tensor> snapshot_params(const Network& net) {
  std::vector<Tensor> out;
  for (const auto& p : net.params.params) out.push_back(p.value);
  return out;
}

void restore_params(Network& net, const std::vector<Tensor>& snap) {
  for (size_t i = 0; i < snap.size(); ++i) net.params.params[i].value = snap[i];
}

EvalReport count_confusion(const std::vector<float>& probs, const std::vector<float>& labels) {
  EvalReport r;
  r.n = int64_t(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    bool pred = probs[i] > 0.5f;  // exactly 0.5 predicts failure
    bool truth = labels[i] > 0.5f;
    if (pred && truth) ++r.tp;
    else if (pred && !truth) ++r.fp;
    else if (!pred && !truth) ++r.tn;
    else ++r.fn;
  }
  r.accuracy = r.n ? double(r.tp + r.tn) / double(r.n) : 0.0;
  return r;
}

}  // namespace

std::vector<int64_t> surrogate_training_indices(const RecordSet& records, double tau) {
  return dataio::occlusion_filtered_indices(records, tau);
}

ClassifierHistory train_classifier(Network& net, const RecordSet& records,
                                   const std::vector<int64_t>& train_idx,
                                   const std::vector<int64_t>& val_idx, InputKind kind,
                                   const TrainConfig& cfg, const worldsim::WorldParams& world,
                                   const GeneratedImages* generated) {
  if (train_idx.empty() || val_idx.empty())
    throw config_error("train_classifier: empty train or validation split");
  if (kind == InputKind::generated && !generated)
    throw config_error("train_classifier: generated input kind requires generated images");
  check_kind(net, kind);

  tensornet::AdamState adam;
  adam.lr = float(cfg.learning_rate);
  adam.bind(net.params);

  ClassifierHistory hist;
  std::vector<Tensor> best;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchSpec spec{cfg.batch_size, derive_seed(cfg.seed, 1000 + uint64_t(epoch)), cfg.augment};
    BatchPlan plan = dataio::plan_batches(train_idx, spec);
    std::vector<double> losses;
    losses.reserve(size_t(plan.batch_count()));

    for (int b = 0; b < plan.batch_count(); ++b) {
      models::FloatTape t;
      models::Ref prob;
      std::vector<float> labels;
      if (kind == InputKind::generated) {
        GeneratedBatch gb = realize_generated(records, *generated, plan, b);
        prob = models::surrogate_forward(t, net, t.input(std::move(gb.image)));
        labels = std::move(gb.labels);
      } else {
        dataio::Batch db = dataio::realize_batch(records, plan, b);
        labels = std::move(db.labels);
        if (kind == InputKind::before_command) {
          Tensor cmd = models::encode_commands(db.command, world);
          prob = models::modelfree_forward(t, net, t.input(std::move(db.before)),
                                           t.input(std::move(cmd)));
        } else {
          prob = models::surrogate_forward(t, net, t.input(std::move(db.during)));
        }
      }
      Tensor lab({int(labels.size()), 1}, std::vector<float>(labels.begin(), labels.end()));
      models::Ref loss = t.bce_loss(prob, lab);
      double lv = double(t.value(loss)[0]);
      if (!std::isfinite(lv))
        throw numeric_error("train_classifier: loss diverged at epoch " +
                            std::to_string(epoch));
      net.params.zero_grad();
      t.backward(loss);
      tensornet::adam_step(net.params, adam);
      losses.push_back(lv);
    }

    hist.train_loss.push_back(median_of(losses));
    EvalReport val = evaluate(net, records, val_idx, kind, world, generated);
    hist.val_reports.push_back(val);

    if (hist.best_epoch < 0 || val.accuracy > hist.best_val_accuracy) {
      hist.best_epoch = epoch;
      hist.best_val_accuracy = val.accuracy;
      best = snapshot_params(net);
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  restore_params(net, best);
  return hist;
}

PredictiveHistory train_predictive(Network& net, const RecordSet& records,
                                   const std::vector<int64_t>& train_idx,
                                   const std::vector<int64_t>& val_idx,
                                   const TrainConfig& cfg,
                                   const worldsim::WorldParams& world) {
  (void)world;
  if (train_idx.empty() || val_idx.empty())
    throw config_error("train_predictive: empty train or validation split");
  if (net.arch != "predictive_v1")
    throw shape_error("train_predictive: expected the predictive net, got " + net.arch);

  tensornet::AdamState adam;
  adam.lr = float(cfg.learning_rate);
  adam.bind(net.params);

  auto val_mse = [&]() {
    BatchPlan plan = identity_plan(val_idx, 128);
    double acc = 0.0;
    int64_t count = 0;
    for (int b = 0; b < plan.batch_count(); ++b) {
      dataio::Batch db = dataio::realize_batch(records, plan, b);
      Tensor cmd = models::encode_commands(db.command, world);
      models::PredictedImages out = models::predict_images(net, db.before, cmd);
      const Tensor& target = db.during;
      int64_t m = target.size();
      double s = 0.0;
      for (int64_t i = 0; i < m; ++i) {
        double d = double(out.predicted[i]) - double(target[i]);
        s += d * d;
      }
      acc += s;
      count += m;
    }
    return acc / double(count);
  };

  PredictiveHistory hist;
  std::vector<Tensor> best;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchSpec spec{cfg.batch_size, derive_seed(cfg.seed, 2000 + uint64_t(epoch)), cfg.augment};
    BatchPlan plan = dataio::plan_batches(train_idx, spec);
    std::vector<double> losses;
    losses.reserve(size_t(plan.batch_count()));

    for (int b = 0; b < plan.batch_count(); ++b) {
      dataio::Batch db = dataio::realize_batch(records, plan, b);
      Tensor cmd = models::encode_commands(db.command, world);
      models::FloatTape t;
      models::PredictiveOut out = models::predictive_forward(t, net, t.input(std::move(db.before)),
                                                     t.input(std::move(cmd)));
      models::Ref loss = t.mse_loss(out.predicted, t.input(std::move(db.during)));
      double lv = double(t.value(loss)[0]);
      if (!std::isfinite(lv))
        throw numeric_error("train_predictive: loss diverged at epoch " +
                            std::to_string(epoch));
      net.params.zero_grad();
      t.backward(loss);
      tensornet::adam_step(net.params, adam);
      losses.push_back(lv);
    }

    hist.train_loss.push_back(median_of(losses));
    double mse = val_mse();
    hist.val_mse.push_back(mse);

    if (hist.best_epoch < 0 || mse < hist.best_val_mse) {
      hist.best_epoch = epoch;
      hist.best_val_mse = mse;
      best = snapshot_params(net);
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      break;
    }
  }
  restore_params(net, best);
  return hist;
}

EvalReport evaluate(Network& net, const RecordSet& records, const std::vector<int64_t>& idx,
                    InputKind kind, const worldsim::WorldParams& world,
                    const GeneratedImages* generated) {
  if (idx.empty()) throw config_error("evaluate: empty split");
  if (kind == InputKind::generated && !generated)
    throw config_error("evaluate: generated input kind requires generated images");
  check_kind(net, kind);

  BatchPlan plan = identity_plan(idx, 256);
  EvalReport running;
  std::vector<float> all_probs, all_labels;
  all_probs.reserve(idx.size());
  all_labels.reserve(idx.size());

  for (int b = 0; b < plan.batch_count(); ++b) {
    Tensor probs;
    std::vector<float> labels;
    if (kind == InputKind::generated) {
      GeneratedBatch gb = realize_generated(records, *generated, plan, b);
      probs = batch_probs(net, kind, gb.image, gb.command, world);
      labels = std::move(gb.labels);
    } else {
      dataio::Batch db = dataio::realize_batch(records, plan, b);
      const Tensor& image = kind == InputKind::before_command ? db.before : db.during;
      probs = batch_probs(net, kind, image, db.command, world);
      labels = std::move(db.labels);
    }
    for (int64_t i = 0; i < probs.size(); ++i) {
      bool pred = probs[i] > 0.5f;
      bool truth = labels[size_t(i)] > 0.5f;
      if (pred && truth) ++running.tp;
      else if (pred && !truth) ++running.fp;
      else if (!pred && !truth) ++running.tn;
      else ++running.fn;
      all_probs.push_back(probs[i]);
      all_labels.push_back(labels[size_t(i)]);
    }
  }
  running.n = int64_t(all_probs.size());
  running.accuracy = double(running.tp + running.tn) / double(running.n);

  // Double-entry check: recount from the stored per-sample predictions.
  EvalReport recount = count_confusion(all_probs, all_labels);
  if (recount.tp != running.tp || recount.fp != running.fp || recount.tn != running.tn ||
      recount.fn != running.fn)
    throw std::logic_error("evaluate: confusion recount mismatch");
  return running;
}

EvalReport evaluate_pipeline(models::PipelineModel& model, const RecordSet& records,
                             const std::vector<int64_t>& idx,
                             const worldsim::WorldParams& world) {
  if (idx.empty()) throw config_error("evaluate_pipeline: empty split");
  BatchPlan plan = identity_plan(idx, 128);
  std::vector<float> all_probs, all_labels;
  for (int b = 0; b < plan.batch_count(); ++b) {
    dataio::Batch db = dataio::realize_batch(records, plan, b);
    Tensor cmd = models::encode_commands(db.command, world);
    // Only the before image and the command cross this interface.
    Tensor probs = models::pipeline_probs(model, db.before, cmd);
    for (int64_t i = 0; i < probs.size(); ++i) {
      all_probs.push_back(probs[i]);
      all_labels.push_back(db.labels[size_t(i)]);
    }
  }
  return count_confusion(all_probs, all_labels);
}

GeneratedImages hallucinate(Network& predictive, const RecordSet& records,
                            const std::vector<int64_t>& idx,
                            const worldsim::WorldParams& world, int batch_size) {
  GeneratedImages out;
  out.image_h = records.image_h;
  out.image_w = records.image_w;
  out.images.resize(size_t(records.count()));
  BatchPlan plan = identity_plan(idx, batch_size);
  size_t hw = size_t(records.image_h) * size_t(records.image_w);
  for (int b = 0; b < plan.batch_count(); ++b) {
    dataio::Batch db = dataio::realize_batch(records, plan, b);
    Tensor cmd = models::encode_commands(db.command, world);
    models::PredictedImages pred = models::predict_images(predictive, db.before, cmd);
    for (size_t i = 0; i < db.indices.size(); ++i) {
      auto& img = out.images[size_t(db.indices[i])];
      img.resize(hw);
      const float* src = pred.predicted.ptr() + int64_t(i) * int64_t(hw);
      for (size_t k = 0; k < hw; ++k) img[k] = dataio::unit_to_u8(src[k]);
    }
  }
  return out;
}

ComparisonArtifacts run_comparison(const dataio::Dataset& dataset,
                                   const ComparisonConfig& cfg, uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  const RecordSet& records = dataset.records;
  int hw = records.image_h;

  ComparisonArtifacts art;
  art.report.seed = seed;
  art.report.dataset_digest = dataio::dataset_digest(dataset.manifest);

  auto seeded = [&](const TrainConfig& base, uint64_t salt) {
    TrainConfig tc = base;
    tc.seed = derive_seed(seed, salt);
    return tc;
  };

  auto [train_idx, val_idx] = dataio::split(dataset.manifest.count, cfg.train_fraction, seed);

  // Stage 1: model-free p(s | I_b, c).
  art.model_free = models::make_modelfree_net(hw, derive_seed(seed, 101));
  train_classifier(art.model_free, records, train_idx, val_idx, InputKind::before_command,
                   seeded(cfg.model_free, 11), cfg.world);
  art.report.model_free.train_accuracy =
      evaluate(art.model_free, records, train_idx, InputKind::before_command, cfg.world)
          .accuracy;
  art.report.model_free.val_accuracy =
      evaluate(art.model_free, records, val_idx, InputKind::before_command, cfg.world)
          .accuracy;

  // Stage 2: surrogate p(s | I_d) on the occlusion-filtered subset.
  std::vector<int64_t> filtered =
      surrogate_training_indices(records, cfg.surrogate.occlusion_tau);
  if (filtered.size() < 2)
    throw config_error("run_comparison: occlusion filter removed the whole dataset");
  auto [ftrain_pos, fval_pos] =
      dataio::split(int64_t(filtered.size()), cfg.train_fraction, seed);
  std::vector<int64_t> sur_train, sur_val;
  for (int64_t p : ftrain_pos) sur_train.push_back(filtered[size_t(p)]);
  for (int64_t p : fval_pos) sur_val.push_back(filtered[size_t(p)]);

  art.surrogate = models::make_surrogate_net(hw, derive_seed(seed, 102));
  train_classifier(art.surrogate, records, sur_train, sur_val, InputKind::during,
                   seeded(cfg.surrogate, 12), cfg.world);
  art.report.surrogate.train_accuracy =
      evaluate(art.surrogate, records, sur_train, InputKind::during, cfg.world).accuracy;
  art.report.surrogate.val_accuracy =
      evaluate(art.surrogate, records, sur_val, InputKind::during, cfg.world).accuracy;

  // Stage 3a: predictive model f(I_b, c) -> I_d.
  art.predictive = models::make_predictive_net(hw, derive_seed(seed, 103));
  train_predictive(art.predictive, records, train_idx, val_idx, seeded(cfg.predictive, 13),
                   cfg.world);

  // Stage 3b: estimator trained on hallucinated during-images.
  std::vector<int64_t> gen_idx = train_idx;
  gen_idx.insert(gen_idx.end(), val_idx.begin(), val_idx.end());
  GeneratedImages gen = hallucinate(art.predictive, records, gen_idx, cfg.world);

  std::vector<int64_t> est_train = train_idx, est_val = val_idx;
  if (cfg.estimator_mix_real) {
    // Mixed variant: each train record appears twice, once hallucinated and
    // once real, via the virtual index space [count, 2*count).
    int64_t count = records.count();
    gen.images.resize(size_t(2 * count));
    size_t hwpx = size_t(hw) * size_t(hw);
    for (int64_t i : train_idx) {
      auto& img = gen.images[size_t(count + i)];
      img.assign(records.records[size_t(i)].during.begin(),
                 records.records[size_t(i)].during.end());
      if (img.size() != hwpx) throw std::logic_error("during image size mismatch");
      est_train.push_back(count + i);
    }
  }

  art.pipeline_estimator = models::make_surrogate_net(hw, derive_seed(seed, 104));
  train_classifier(art.pipeline_estimator, records, est_train, est_val, InputKind::generated,
                   seeded(cfg.pipeline_estimator, 14), cfg.world, &gen);

  art.report.pipeline.train_accuracy =
      evaluate(art.pipeline_estimator, records, train_idx, InputKind::generated, cfg.world,
               &gen)
          .accuracy;
  models::PipelineModel pipe{art.predictive, art.pipeline_estimator};
  art.report.pipeline.val_accuracy =
      evaluate_pipeline(pipe, records, val_idx, cfg.world).accuracy;

  art.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return art;
}

worldsim::Observation render_prediction_grid(Network& predictive, const RecordSet& records,
                                             const std::vector<int64_t>& idx, int n,
                                             const worldsim::WorldParams& world) {
  if (n < 1) throw config_error("render_prediction_grid: n must be >= 1");
  if (size_t(n) > idx.size())
    throw config_error("render_prediction_grid: n (" + std::to_string(n) +
                       ") exceeds the split size (" + std::to_string(idx.size()) + ")");
  int h = records.image_h, w = records.image_w;
  std::vector<int64_t> take(idx.begin(), idx.begin() + n);
  BatchPlan plan = identity_plan(take, n);
  dataio::Batch db = dataio::realize_batch(records, plan, 0);
  Tensor cmd = models::encode_commands(db.command, world);
  models::PredictedImages pred = models::predict_images(predictive, db.before, cmd);

  worldsim::Observation grid;
  grid.h = n * h;
  grid.w = 3 * w;
  grid.pixels.assign(size_t(grid.h) * size_t(grid.w), 0.0f);
  for (int k = 0; k < n; ++k)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        int64_t off = int64_t(k) * h * w + int64_t(r) * w + c;
        grid.at(k * h + r, c) = db.before[off];
        grid.at(k * h + r, w + c) = pred.predicted[off];
        grid.at(k * h + r, 2 * w + c) = db.during[off];
      }
  return grid;
}

void write_pgm(const worldsim::Observation& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open PGM for writing: " + path);
  out << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> row(size_t(img.w));
  for (int r = 0; r < img.h; ++r) {
    for (int c = 0; c < img.w; ++c) row[size_t(c)] = dataio::unit_to_u8(img.at(r, c));
    out.write(reinterpret_cast<const char*>(row.data()), img.w);
  }
  if (!out) throw io_error("short write to " + path);
}

worldsim::Observation read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open PGM: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
    throw io_error("not a maxval-255 P5 PGM: " + path);
  in.get();  // single whitespace after header
  worldsim::Observation img;
  img.h = h;
  img.w = w;
  img.pixels.resize(size_t(h) * size_t(w));
  std::vector<uint8_t> raw(size_t(h) * size_t(w));
  in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (in.gcount() != std::streamsize(raw.size())) throw io_error("truncated PGM: " + path);
  for (size_t i = 0; i < raw.size(); ++i) img.pixels[i] = dataio::u8_to_unit(raw[i]);
  return img;
}

nlohmann::json eval_to_json(const EvalReport& r) {
  return {{"accuracy", r.accuracy}, {"tp", r.tp}, {"fp", r.fp},
          {"tn", r.tn},             {"fn", r.fn}, {"n", r.n}};
}

nlohmann::json report_to_json(const ComparisonReport& r) {
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx", (unsigned long long)r.dataset_digest);
  auto exp = [](const ExperimentResult& e) {
    return nlohmann::json{{"train_accuracy", e.train_accuracy},
                          {"val_accuracy", e.val_accuracy}};
  };
  return {{"seed", r.seed},
          {"dataset_digest", std::string(digest)},
          {"wall_seconds", r.wall_seconds},
          {"model_free", exp(r.model_free)},
          {"surrogate", exp(r.surrogate)},
          {"pipeline", exp(r.pipeline)}};
}

ComparisonReport median_report(const std::vector<ComparisonReport>& reports) {
  if (reports.empty()) throw config_error("median_report: no reports");
  auto med = [&](auto field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(field(r));
    return median_of(v);
  };
  ComparisonReport m;
  m.model_free.train_accuracy = med([](const auto& r) { return r.model_free.train_accuracy; });
  m.model_free.val_accuracy = med([](const auto& r) { return r.model_free.val_accuracy; });
  m.surrogate.train_accuracy = med([](const auto& r) { return r.surrogate.train_accuracy; });
  m.surrogate.val_accuracy = med([](const auto& r) { return r.surrogate.val_accuracy; });
  m.pipeline.train_accuracy = med([](const auto& r) { return r.pipeline.train_accuracy; });
  m.pipeline.val_accuracy = med([](const auto& r) { return r.pipeline.val_accuracy; });
  m.dataset_digest = reports.front().dataset_digest;
  for (const auto& r : reports) m.wall_seconds += r.wall_seconds;
  return m;
}

std::string format_report_table(const std::vector<ComparisonReport>& reports) {
  std::string out;
  char line[160];
  auto block = [&](const std::string& title, const ComparisonReport& r) {
    out += title + "\n";
    std::snprintf(line, sizeof(line), "  %-36s %8s %12s\n", "estimator", "train", "validation");
    out += line;
    auto row = [&](const char* name, const ExperimentResult& e) {
      std::snprintf(line, sizeof(line), "  %-36s %7.1f%% %11.1f%%\n", name,
                    100.0 * e.train_accuracy, 100.0 * e.val_accuracy);
      out += line;
    };
    row("model-free p(s | I_b, c)", r.model_free);
    row("surrogate p(s | I_d)", r.surrogate);
    row("model-based f(I_b,c), p(s | I_hat_d)", r.pipeline);
  };
  for (const auto& r : reports) {
    char title[96];
    std::snprintf(title, sizeof(title), "seed %llu (%.0f s)", (unsigned long long)r.seed,
                  r.wall_seconds);
    block(title, r);
    out += "\n";
  }
  if (reports.size() > 1) block("median over seeds", median_report(reports));
  return out;
}

}  // namespace gs::trainbench
