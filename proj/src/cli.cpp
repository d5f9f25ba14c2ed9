#include "graspsight/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "graspsight/errors.hpp"
#include "graspsight/runconfig.hpp"

namespace gs::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using runconfig::RunConfig;

namespace {

RunConfig config_for(const CommonOptions& common) {
  if (common.config_path.empty()) {
    RunConfig cfg = runconfig::default_config();
    runconfig::validate(cfg);
    return cfg;
  }
  return runconfig::load_config(common.config_path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw io_error("short write to " + path);
}

json history_json(const trainbench::ClassifierHistory& h) {
  json epochs = json::array();
  for (size_t e = 0; e < h.train_loss.size(); ++e)
    epochs.push_back({{"epoch", e},
                      {"train_loss", h.train_loss[e]},
                      {"val_accuracy", h.val_reports[e].accuracy}});
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}};
}

json history_json(const trainbench::PredictiveHistory& h) {
  json epochs = json::array();
  for (size_t e = 0; e < h.train_loss.size(); ++e)
    epochs.push_back(
        {{"epoch", e}, {"train_loss", h.train_loss[e]}, {"val_mse", h.val_mse[e]}});
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}};
}

}  // namespace

int cmd_gen(const GenOptions& opt) {
  RunConfig cfg = config_for(opt.common);
  if (opt.count) cfg.gen.count = *opt.count;
  if (opt.seed) cfg.gen.seed = *opt.seed;
  if (opt.image_size) cfg.gen.image_size = *opt.image_size;
  cfg.gen.train_fraction = cfg.train_fraction;
  runconfig::validate(cfg);
  if (opt.out_dir.empty()) throw config_error("gen: --out is required");

  dataio::DatasetManifest m = dataio::generate_dataset(cfg.world, cfg.gen, opt.out_dir);
  double rate = m.count ? double(m.positive_count) / double(m.count) : 0.0;
  if (opt.common.json) {
    json j = {{"count", m.count},
              {"positive_count", m.positive_count},
              {"positive_rate", rate},
              {"out", opt.out_dir}};
    std::printf("%s\n", j.dump().c_str());
  } else {
    std::printf("generated %lld records (%lld positive, rate %.3f) -> %s\n",
                (long long)m.count, (long long)m.positive_count, rate, opt.out_dir.c_str());
  }
  return kExitOk;
}

int cmd_train(const TrainOptions& opt) {
  RunConfig cfg = config_for(opt.common);
  if (opt.data_dir.empty() || opt.out_ckpt.empty())
    throw config_error("train: --data and --out are required");

  dataio::Dataset ds = dataio::load_dataset(opt.data_dir);
  int hw = ds.records.image_h;
  json hist;

  if (opt.task == "model-free") {
    trainbench::TrainConfig tc = cfg.train_model_free;
    auto [train_idx, val_idx] = dataio::split(ds.manifest.count, cfg.train_fraction, tc.seed);
    models::Network net = models::make_modelfree_net(hw, derive_seed(tc.seed, 201));
    auto h = trainbench::train_classifier(net, ds.records, train_idx, val_idx,
                                          trainbench::InputKind::before_command, tc,
                                          cfg.world);
    models::save_network(net, opt.out_ckpt);
    hist = history_json(h);
  } else if (opt.task == "surrogate") {
    trainbench::TrainConfig tc = cfg.train_surrogate;
    auto filtered = trainbench::surrogate_training_indices(ds.records, tc.occlusion_tau);
    if (filtered.size() < 2)
      throw config_error("train: occlusion filter removed the whole dataset");
    auto [tpos, vpos] = dataio::split(int64_t(filtered.size()), cfg.train_fraction, tc.seed);
    std::vector<int64_t> train_idx, val_idx;
    for (int64_t p : tpos) train_idx.push_back(filtered[size_t(p)]);
    for (int64_t p : vpos) val_idx.push_back(filtered[size_t(p)]);
    models::Network net = models::make_surrogate_net(hw, derive_seed(tc.seed, 202));
    auto h = trainbench::train_classifier(net, ds.records, train_idx, val_idx,
                                          trainbench::InputKind::during, tc, cfg.world);
    models::save_network(net, opt.out_ckpt);
    hist = history_json(h);
  } else if (opt.task == "predictive") {
    trainbench::TrainConfig tc = cfg.train_predictive;
    auto [train_idx, val_idx] = dataio::split(ds.manifest.count, cfg.train_fraction, tc.seed);
    models::Network net = models::make_predictive_net(hw, derive_seed(tc.seed, 203));
    auto h = trainbench::train_predictive(net, ds.records, train_idx, val_idx, tc, cfg.world);
    models::save_network(net, opt.out_ckpt);
    hist = history_json(h);
  } else {
    throw config_error("train: unknown task '" + opt.task +
                       "' (valid: model-free, surrogate, predictive)");
  }

  hist["task"] = opt.task;
  write_text(opt.out_ckpt + ".history.json", hist.dump(2) + "\n");
  if (opt.common.json)
    std::printf("%s\n", hist.dump().c_str());
  else
    std::printf("trained %s -> %s (%d epochs recorded)\n", opt.task.c_str(),
                opt.out_ckpt.c_str(), int(hist["epochs"].size()));
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt) {
  RunConfig cfg = config_for(opt.common);
  if (opt.ckpt_path.empty() || opt.data_dir.empty())
    throw config_error("eval: --ckpt and --data are required");
  if (opt.split != "train" && opt.split != "val")
    throw config_error("eval: --split must be 'train' or 'val'");

  models::Network net = models::load_network(opt.ckpt_path);
  if (net.arch == "predictive_v1")
    throw config_error("eval: checkpoint holds the predictive model; expected a classifier");
  dataio::Dataset ds = dataio::load_dataset(opt.data_dir);
  if (net.image_hw != ds.records.image_h || net.image_hw != ds.records.image_w)
    throw config_error("eval: checkpoint image size " + std::to_string(net.image_hw) +
                       " does not match dataset " + std::to_string(ds.records.image_h));

  trainbench::InputKind kind;
  std::vector<int64_t> train_idx, val_idx;
  if (net.arch == "modelfree_v1") {
    kind = trainbench::InputKind::before_command;
    std::tie(train_idx, val_idx) =
        dataio::split(ds.manifest.count, cfg.train_fraction, cfg.train_model_free.seed);
  } else {
    kind = trainbench::InputKind::during;
    trainbench::TrainConfig tc = cfg.train_surrogate;
    auto filtered = trainbench::surrogate_training_indices(ds.records, tc.occlusion_tau);
    auto [tpos, vpos] = dataio::split(int64_t(filtered.size()), cfg.train_fraction, tc.seed);
    for (int64_t p : tpos) train_idx.push_back(filtered[size_t(p)]);
    for (int64_t p : vpos) val_idx.push_back(filtered[size_t(p)]);
  }
  const auto& idx = opt.split == "train" ? train_idx : val_idx;
  trainbench::EvalReport r = trainbench::evaluate(net, ds.records, idx, kind, cfg.world);
  if (opt.common.json) {
    std::printf("%s\n", trainbench::eval_to_json(r).dump().c_str());
  } else {
    std::printf("%s split: accuracy %.4f (tp %lld fp %lld tn %lld fn %lld, n %lld)\n",
                opt.split.c_str(), r.accuracy, (long long)r.tp, (long long)r.fp,
                (long long)r.tn, (long long)r.fn, (long long)r.n);
  }
  return kExitOk;
}

int cmd_compare(const CompareOptions& opt) {
  RunConfig cfg = config_for(opt.common);
  if (opt.data_dir.empty() || opt.out_dir.empty())
    throw config_error("compare: --data and --out are required");
  dataio::Dataset ds = dataio::load_dataset(opt.data_dir);

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  trainbench::ComparisonConfig cc = runconfig::comparison_config(cfg);

  std::vector<trainbench::ComparisonReport> reports;
  bool first = true;
  for (uint64_t seed : cfg.comparison_seeds) {
    trainbench::ComparisonArtifacts art = trainbench::run_comparison(ds, cc, seed);
    reports.push_back(art.report);
    std::string tag = "_seed" + std::to_string(seed) + ".ckpt";
    models::save_network(art.model_free, (fs::path(opt.out_dir) / ("model_free" + tag)).string());
    models::save_network(art.surrogate, (fs::path(opt.out_dir) / ("surrogate" + tag)).string());
    models::save_network(art.predictive,
                         (fs::path(opt.out_dir) / ("predictive" + tag)).string());
    models::save_network(art.pipeline_estimator,
                         (fs::path(opt.out_dir) / ("pipeline_estimator" + tag)).string());
    if (first) {
      auto [train_idx, val_idx] =
          dataio::split(ds.manifest.count, cfg.train_fraction, seed);
      int n = int(std::min<size_t>(8, val_idx.size()));
      worldsim::Observation grid = trainbench::render_prediction_grid(
          art.predictive, ds.records, val_idx, n, cfg.world);
      trainbench::write_pgm(grid, (fs::path(opt.out_dir) / "predictions.pgm").string());
      first = false;
    }
  }

  json out;
  out["seeds"] = json::array();
  for (const auto& r : reports) out["seeds"].push_back(trainbench::report_to_json(r));
  out["median"] = trainbench::report_to_json(trainbench::median_report(reports));
  out["median"].erase("seed");
  write_text((fs::path(opt.out_dir) / "report.json").string(), out.dump(2) + "\n");

  std::string table = trainbench::format_report_table(reports);
  write_text((fs::path(opt.out_dir) / "report.txt").string(), table);

  if (opt.common.json)
    std::printf("%s\n", out.dump().c_str());
  else
    std::printf("%s", table.c_str());
  return kExitOk;
}

int cmd_render(const RenderOptions& opt) {
  RunConfig cfg = config_for(opt.common);
  if (opt.ckpt_path.empty() || opt.data_dir.empty() || opt.out_path.empty())
    throw config_error("render: --ckpt, --data and --out are required");
  models::Network net = models::load_network(opt.ckpt_path);
  if (net.arch != "predictive_v1")
    throw config_error("render: checkpoint arch is " + net.arch +
                       "; the prediction grid needs the predictive model");
  dataio::Dataset ds = dataio::load_dataset(opt.data_dir);
  if (net.image_hw != ds.records.image_h)
    throw config_error("render: checkpoint image size does not match dataset");
  auto [train_idx, val_idx] =
      dataio::split(ds.manifest.count, cfg.train_fraction, cfg.train_predictive.seed);
  worldsim::Observation grid =
      trainbench::render_prediction_grid(net, ds.records, val_idx, opt.n, cfg.world);
  trainbench::write_pgm(grid, opt.out_path);
  std::printf("wrote %dx%d grid -> %s\n", grid.w, grid.h, opt.out_path.c_str());
  return kExitOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const shape_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace gs::cli
