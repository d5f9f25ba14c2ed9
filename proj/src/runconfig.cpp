#include "graspsight/runconfig.hpp"

#include <cmath>
#include <exception>
#include <fstream>
#include <set>

#include <json.hpp>

#include "graspsight/errors.hpp"

namespace gs::runconfig {

using nlohmann::json;

namespace {

// Pulls known keys out of `j`, complaining about anything left over.
struct KeyChecker {
  const json& j;
  std::string scope;
  std::set<std::string> seen;
  int live_exceptions = std::uncaught_exceptions();

  KeyChecker(const json& jj, std::string s) : j(jj), scope(std::move(s)) {
    if (!j.is_object()) throw config_error("config section '" + scope + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen.insert(key);
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw config_error("config key '" + scope + key + "' has the wrong type");
    }
  }

  const json* sub(const char* key) {
    seen.insert(key);
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
  }

  // Unknown-key check; must stay silent if another exception is unwinding.
  ~KeyChecker() noexcept(false) {
    if (std::uncaught_exceptions() != live_exceptions) return;
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!seen.count(it.key()))
        throw config_error("unknown config key '" + scope + it.key() + "'");
  }
};

void parse_world(const json& j, worldsim::WorldParams& w) {
  KeyChecker k(j, "world.");
  k.get("bin_min", w.bin_min);
  k.get("bin_max", w.bin_max);
  k.get("n_objects_min", w.n_objects_min);
  k.get("n_objects_max", w.n_objects_max);
  k.get("object_min_size", w.object_min_size);
  k.get("object_max_size", w.object_max_size);
  k.get("box_probability", w.box_probability);
  k.get("intensity_min", w.intensity_min);
  k.get("intensity_max", w.intensity_max);
  k.get("jitter_max", w.jitter_max);
  k.get("pad_half_len", w.pad_half_len);
  k.get("aperture_min", w.aperture_min);
  k.get("aperture_max", w.aperture_max);
  k.get("object_bias", w.object_bias);
  k.get("object_bias_radius", w.object_bias_radius);
  k.get("overlap_gap", w.overlap_gap);
  k.get("max_place_tries", w.max_place_tries);
  k.get("background", w.background);
  k.get("wall_intensity", w.wall_intensity);
  k.get("wall_thickness", w.wall_thickness);
  k.get("finger_thickness", w.finger_thickness);
  k.get("crossbar_thickness", w.crossbar_thickness);
  k.get("gripper_intensity", w.gripper_intensity);
}

void parse_gen(const json& j, dataio::GenParams& g) {
  KeyChecker k(j, "gen.");
  k.get("count", g.count);
  k.get("seed", g.seed);
  k.get("image_size", g.image_size);
}

void parse_train(const json& j, const std::string& scope, trainbench::TrainConfig& t) {
  KeyChecker k(j, scope);
  k.get("epochs", t.epochs);
  k.get("batch_size", t.batch_size);
  k.get("learning_rate", t.learning_rate);
  k.get("seed", t.seed);
  k.get("augment", t.augment);
  k.get("early_stop_patience", t.early_stop_patience);
  k.get("occlusion_tau", t.occlusion_tau);
}

}  // namespace

RunConfig default_config() {
  RunConfig cfg;
  cfg.train_model_free.epochs = 5;
  cfg.train_surrogate.epochs = 5;
  cfg.train_predictive.epochs = 3;
  cfg.train_pipeline_estimator.epochs = 5;
  return cfg;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error("config " + origin + " is not valid JSON: " + e.what());
  }
  RunConfig cfg = default_config();
  {
    KeyChecker k(j, "");
    if (const json* w = k.sub("world")) parse_world(*w, cfg.world);
    if (const json* g = k.sub("gen")) parse_gen(*g, cfg.gen);
    if (const json* t = k.sub("train")) {
      KeyChecker kt(*t, "train.");
      if (const json* s = kt.sub("model_free"))
        parse_train(*s, "train.model_free.", cfg.train_model_free);
      if (const json* s = kt.sub("surrogate"))
        parse_train(*s, "train.surrogate.", cfg.train_surrogate);
      if (const json* s = kt.sub("predictive"))
        parse_train(*s, "train.predictive.", cfg.train_predictive);
      if (const json* s = kt.sub("pipeline_estimator"))
        parse_train(*s, "train.pipeline_estimator.", cfg.train_pipeline_estimator);
    }
    k.get("train_fraction", cfg.train_fraction);
    bool tau_given = j.contains("occlusion_tau");
    k.get("occlusion_tau", cfg.occlusion_tau);
    if (tau_given) {
      cfg.train_model_free.occlusion_tau = cfg.occlusion_tau;
      cfg.train_surrogate.occlusion_tau = cfg.occlusion_tau;
      cfg.train_predictive.occlusion_tau = cfg.occlusion_tau;
      cfg.train_pipeline_estimator.occlusion_tau = cfg.occlusion_tau;
    }
    k.get("comparison_seeds", cfg.comparison_seeds);
    k.get("estimator_mix_real", cfg.estimator_mix_real);
  }
  // Per-task occlusion_tau set inside train.* wins over the top-level value;
  // reparse those sections to restore explicit settings.
  if (j.contains("train")) {
    const json& t = j["train"];
    auto reapply = [&](const char* key, trainbench::TrainConfig& tc) {
      if (t.contains(key) && t[key].contains("occlusion_tau"))
        tc.occlusion_tau = t[key]["occlusion_tau"].get<double>();
    };
    reapply("model_free", cfg.train_model_free);
    reapply("surrogate", cfg.train_surrogate);
    reapply("predictive", cfg.train_predictive);
    reapply("pipeline_estimator", cfg.train_pipeline_estimator);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path);
}

void validate(const RunConfig& cfg) {
  const auto& w = cfg.world;
  auto fail = [](const std::string& msg) { throw config_error("config: " + msg); };
  if (!(w.bin_min > 0.0 && w.bin_max < 1.0 && w.bin_min < w.bin_max))
    fail("bin bounds must satisfy 0 < bin_min < bin_max < 1");
  if (std::fabs(w.bin_min + w.bin_max - 1.0) > 1e-9)
    fail("bin must be centred (bin_min + bin_max == 1) so horizontal flips stay label-exact");
  if (w.n_objects_min < 0 || w.n_objects_max > 8 || w.n_objects_min > w.n_objects_max)
    fail("object count range must satisfy 0 <= min <= max <= 8");
  if (w.object_min_size < 0.02 || w.object_max_size > 0.10 ||
      w.object_min_size > w.object_max_size)
    fail("object sizes must lie in [0.02, 0.10]");
  if (w.box_probability < 0.0 || w.box_probability > 1.0) fail("box_probability not in [0,1]");
  if (w.intensity_min < 0.4 - 1e-12 || w.intensity_max > 0.9 + 1e-12 ||
      w.intensity_min > w.intensity_max)
    fail("object intensities must lie in [0.4, 0.9]");
  if (w.jitter_max < 0.0 || w.jitter_max > 0.03 + 1e-12)
    fail("jitter_max must lie in [0, 0.03]");
  if (w.pad_half_len <= 0.0 || w.pad_half_len > 0.2) fail("pad_half_len out of range");
  if (!(w.aperture_min > 0.0 && w.aperture_min < w.aperture_max && w.aperture_max <= 0.25))
    fail("aperture range must satisfy 0 < min < max <= 0.25");
  if (w.object_bias < 0.0 || w.object_bias > 1.0) fail("object_bias not in [0,1]");
  if (w.overlap_gap < 0.0) fail("overlap_gap must be >= 0");
  if (w.max_place_tries < 1) fail("max_place_tries must be >= 1");
  if (cfg.gen.count < 1) fail("gen.count must be >= 1");
  if (cfg.gen.image_size < 16 || cfg.gen.image_size % 16 != 0)
    fail("gen.image_size must be a positive multiple of 16");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    fail("train_fraction must be in (0,1)");
  if (cfg.comparison_seeds.empty()) fail("comparison_seeds must not be empty");
  for (const trainbench::TrainConfig* t :
       {&cfg.train_model_free, &cfg.train_surrogate, &cfg.train_predictive,
        &cfg.train_pipeline_estimator}) {
    if (t->epochs < 1) fail("epochs must be >= 1");
    if (t->batch_size < 1) fail("batch_size must be >= 1");
    if (!(t->learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (t->early_stop_patience < 1 || t->early_stop_patience > t->epochs)
      fail("early_stop_patience must be in [1, epochs]");
    if (t->occlusion_tau < 0.0 || t->occlusion_tau > 1.0) fail("occlusion_tau not in [0,1]");
  }
}

trainbench::ComparisonConfig comparison_config(const RunConfig& cfg) {
  trainbench::ComparisonConfig cc;
  cc.model_free = cfg.train_model_free;
  cc.surrogate = cfg.train_surrogate;
  cc.predictive = cfg.train_predictive;
  cc.pipeline_estimator = cfg.train_pipeline_estimator;
  cc.train_fraction = cfg.train_fraction;
  cc.estimator_mix_real = cfg.estimator_mix_real;
  cc.world = cfg.world;
  return cc;
}

}  // namespace gs::runconfig
