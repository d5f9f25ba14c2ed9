// pybind11 module exposing the main operations: world sampling and oracles,
// rendering, dataset generation and storage, the three estimators, training
// and the comparison bench. Images cross the boundary as numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "graspsight/cli.hpp"
#include "graspsight/dataio.hpp"
#include "graspsight/models.hpp"
#include "graspsight/runconfig.hpp"
#include "graspsight/trainbench.hpp"
#include "graspsight/worldsim.hpp"

namespace py = pybind11;
using namespace gs;

namespace {

py::array_t<float> obs_to_numpy(const worldsim::Observation& o) {
  py::array_t<float> a({o.h, o.w});
  std::copy(o.pixels.begin(), o.pixels.end(), a.mutable_data());
  return a;
}

py::array_t<uint8_t> u8_to_numpy(const std::vector<uint8_t>& v, int h, int w) {
  py::array_t<uint8_t> a({h, w});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

tensornet::Tensor numpy_to_batch(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
  auto buf = arr.request();
  if (buf.ndim == 2) {
    tensornet::Tensor t({1, 1, int(buf.shape[0]), int(buf.shape[1])});
    std::copy_n(static_cast<const float*>(buf.ptr), t.size(), t.ptr());
    return t;
  }
  if (buf.ndim == 3) {
    tensornet::Tensor t({int(buf.shape[0]), 1, int(buf.shape[1]), int(buf.shape[2])});
    std::copy_n(static_cast<const float*>(buf.ptr), t.size(), t.ptr());
    return t;
  }
  throw shape_error("expected an image (H,W) or an image batch (N,H,W)");
}

tensornet::Tensor commands_to_tensor(const std::vector<worldsim::GraspCommand>& cmds) {
  tensornet::Tensor t({int(cmds.size()), 4});
  for (size_t i = 0; i < cmds.size(); ++i) {
    float* p = t.ptr() + 4 * i;
    p[0] = float(cmds[i].x);
    p[1] = float(cmds[i].y);
    p[2] = float(cmds[i].theta);
    p[3] = float(cmds[i].aperture);
  }
  return t;
}

py::array_t<float> tensor_images_to_numpy(const tensornet::Tensor& t) {
  // [N,1,H,W] -> (N,H,W)
  py::array_t<float> a({t.dim(0), t.dim(2), t.dim(3)});
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

py::array_t<float> probs_to_numpy(const tensornet::Tensor& t) {
  py::array_t<float> a(t.dim(0));
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

py::dict eval_to_dict(const trainbench::EvalReport& r) {
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["tp"] = r.tp;
  d["fp"] = r.fp;
  d["tn"] = r.tn;
  d["fn"] = r.fn;
  d["n"] = r.n;
  return d;
}

py::dict report_to_dict(const trainbench::ComparisonReport& r) {
  auto exp = [](const trainbench::ExperimentResult& e) {
    py::dict d;
    d["train_accuracy"] = e.train_accuracy;
    d["val_accuracy"] = e.val_accuracy;
    return d;
  };
  py::dict d;
  d["seed"] = r.seed;
  d["wall_seconds"] = r.wall_seconds;
  d["model_free"] = exp(r.model_free);
  d["surrogate"] = exp(r.surrogate);
  d["pipeline"] = exp(r.pipeline);
  return d;
}

}  // namespace

PYBIND11_MODULE(_graspsight, m) {
  m.doc() = "planar self-supervised grasp estimation bench";

  // -- worldsim ---------------------------------------------------------------

  py::class_<worldsim::Vec2>(m, "Vec2")
      .def(py::init<>())
      .def(py::init([](double x, double y) { return worldsim::Vec2{x, y}; }))
      .def_readwrite("x", &worldsim::Vec2::x)
      .def_readwrite("y", &worldsim::Vec2::y);

  py::enum_<worldsim::ShapeKind>(m, "ShapeKind")
      .value("disc", worldsim::ShapeKind::disc)
      .value("box", worldsim::ShapeKind::box);

  py::class_<worldsim::ObjectInstance>(m, "ObjectInstance")
      .def(py::init<>())
      .def_readwrite("kind", &worldsim::ObjectInstance::kind)
      .def_readwrite("center", &worldsim::ObjectInstance::center)
      .def_readwrite("radius", &worldsim::ObjectInstance::radius)
      .def_readwrite("half_w", &worldsim::ObjectInstance::half_w)
      .def_readwrite("half_h", &worldsim::ObjectInstance::half_h)
      .def_readwrite("orientation", &worldsim::ObjectInstance::orientation)
      .def_readwrite("intensity", &worldsim::ObjectInstance::intensity);

  py::class_<worldsim::Scene>(m, "Scene")
      .def(py::init<>())
      .def_readwrite("objects", &worldsim::Scene::objects)
      .def_readwrite("bin_min", &worldsim::Scene::bin_min)
      .def_readwrite("bin_max", &worldsim::Scene::bin_max)
      .def_readwrite("camera_jitter", &worldsim::Scene::camera_jitter);

  py::class_<worldsim::GraspCommand>(m, "GraspCommand")
      .def(py::init<>())
      .def(py::init([](double x, double y, double theta, double aperture) {
             return worldsim::GraspCommand{x, y, theta, aperture};
           }),
           py::arg("x"), py::arg("y"), py::arg("theta"), py::arg("aperture"))
      .def_readwrite("x", &worldsim::GraspCommand::x)
      .def_readwrite("y", &worldsim::GraspCommand::y)
      .def_readwrite("theta", &worldsim::GraspCommand::theta)
      .def_readwrite("aperture", &worldsim::GraspCommand::aperture);

  py::enum_<worldsim::GraspReason>(m, "GraspReason")
      .value("miss", worldsim::GraspReason::miss)
      .value("collision", worldsim::GraspReason::collision)
      .value("multi_contact", worldsim::GraspReason::multi_contact)
      .value("ok", worldsim::GraspReason::ok);

  py::class_<worldsim::GraspOutcome>(m, "GraspOutcome")
      .def_readonly("success", &worldsim::GraspOutcome::success)
      .def_readonly("grasped_index", &worldsim::GraspOutcome::grasped_index)
      .def_readonly("reason", &worldsim::GraspOutcome::reason);

  py::class_<worldsim::WorldParams>(m, "WorldParams")
      .def(py::init<>())
      .def_readwrite("bin_min", &worldsim::WorldParams::bin_min)
      .def_readwrite("bin_max", &worldsim::WorldParams::bin_max)
      .def_readwrite("n_objects_min", &worldsim::WorldParams::n_objects_min)
      .def_readwrite("n_objects_max", &worldsim::WorldParams::n_objects_max)
      .def_readwrite("object_min_size", &worldsim::WorldParams::object_min_size)
      .def_readwrite("object_max_size", &worldsim::WorldParams::object_max_size)
      .def_readwrite("box_probability", &worldsim::WorldParams::box_probability)
      .def_readwrite("jitter_max", &worldsim::WorldParams::jitter_max)
      .def_readwrite("pad_half_len", &worldsim::WorldParams::pad_half_len)
      .def_readwrite("aperture_min", &worldsim::WorldParams::aperture_min)
      .def_readwrite("aperture_max", &worldsim::WorldParams::aperture_max)
      .def_readwrite("object_bias", &worldsim::WorldParams::object_bias)
      .def_readwrite("object_bias_radius", &worldsim::WorldParams::object_bias_radius);

  m.def("sample_scene", &worldsim::sample_scene, py::arg("seed"), py::arg("n_objects"),
        py::arg("params") = worldsim::WorldParams{});
  m.def(
      "fingertips",
      [](const worldsim::GraspCommand& c) {
        auto [f1, f2] = worldsim::fingertips(c);
        return py::make_tuple(py::make_tuple(f1.x, f1.y), py::make_tuple(f2.x, f2.y));
      },
      py::arg("command"));
  m.def("grasp_outcome", &worldsim::grasp_outcome, py::arg("scene"), py::arg("command"),
        py::arg("params") = worldsim::WorldParams{});
  m.def("raster_grasp_oracle", &worldsim::raster_grasp_oracle, py::arg("scene"),
        py::arg("command"), py::arg("resolution") = 256,
        py::arg("params") = worldsim::WorldParams{});
  m.def(
      "render_before",
      [](const worldsim::Scene& s, int res, const worldsim::WorldParams& p) {
        return obs_to_numpy(worldsim::render_before(s, res, p));
      },
      py::arg("scene"), py::arg("resolution") = 64,
      py::arg("params") = worldsim::WorldParams{});
  m.def(
      "render_during",
      [](const worldsim::Scene& s, const worldsim::GraspCommand& c, int res,
         const worldsim::WorldParams& p) {
        return obs_to_numpy(worldsim::render_during(s, c, res, p));
      },
      py::arg("scene"), py::arg("command"), py::arg("resolution") = 64,
      py::arg("params") = worldsim::WorldParams{});
  m.def("occlusion_fraction", &worldsim::occlusion_fraction, py::arg("scene"),
        py::arg("command"), py::arg("resolution") = 64,
        py::arg("params") = worldsim::WorldParams{});
  py::class_<worldsim::GraspDebug>(m, "GraspDebug")
      .def_readonly("outcome", &worldsim::GraspDebug::outcome)
      .def_readonly("focus_object", &worldsim::GraspDebug::focus_object)
      .def_readonly("extent", &worldsim::GraspDebug::extent)
      .def_readonly("centroid_offset", &worldsim::GraspDebug::centroid_offset);
  m.def("grasp_debug", &worldsim::grasp_debug, py::arg("scene"), py::arg("command"),
        py::arg("params") = worldsim::WorldParams{});
  py::enum_<worldsim::RasterStage>(m, "RasterStage")
      .value("ok", worldsim::RasterStage::ok)
      .value("initial_overlap", worldsim::RasterStage::initial_overlap)
      .value("no_contact", worldsim::RasterStage::no_contact)
      .value("different_ids", worldsim::RasterStage::different_ids)
      .value("nonpositive_gap", worldsim::RasterStage::nonpositive_gap)
      .value("offset_fail", worldsim::RasterStage::offset_fail);
  py::class_<worldsim::RasterTrace>(m, "RasterTrace")
      .def_readonly("result", &worldsim::RasterTrace::result)
      .def_readonly("stage", &worldsim::RasterTrace::stage)
      .def_readonly("id1", &worldsim::RasterTrace::id1)
      .def_readonly("id2", &worldsim::RasterTrace::id2)
      .def_readonly("gap", &worldsim::RasterTrace::gap);
  m.def("raster_grasp_trace", &worldsim::raster_grasp_trace, py::arg("scene"),
        py::arg("command"), py::arg("resolution") = 256,
        py::arg("params") = worldsim::WorldParams{});

  // -- dataio -------------------------------------------------------------------

  py::class_<dataio::GraspRecord>(m, "GraspRecord")
      .def_readonly("x", &dataio::GraspRecord::x)
      .def_readonly("y", &dataio::GraspRecord::y)
      .def_readonly("theta", &dataio::GraspRecord::theta)
      .def_readonly("aperture", &dataio::GraspRecord::aperture)
      .def_readonly("label", &dataio::GraspRecord::label)
      .def_readonly("occlusion", &dataio::GraspRecord::occlusion)
      .def("command", &dataio::GraspRecord::command);

  py::class_<dataio::RecordSet>(m, "RecordSet")
      .def_readonly("image_h", &dataio::RecordSet::image_h)
      .def_readonly("image_w", &dataio::RecordSet::image_w)
      .def("__len__", [](const dataio::RecordSet& s) { return s.count(); })
      .def("record", [](const dataio::RecordSet& s, int64_t i) { return s.records.at(size_t(i)); })
      .def("before",
           [](const dataio::RecordSet& s, int64_t i) {
             return u8_to_numpy(s.records.at(size_t(i)).before, s.image_h, s.image_w);
           })
      .def("during", [](const dataio::RecordSet& s, int64_t i) {
        return u8_to_numpy(s.records.at(size_t(i)).during, s.image_h, s.image_w);
      });

  py::class_<dataio::DatasetManifest>(m, "DatasetManifest")
      .def_readonly("count", &dataio::DatasetManifest::count)
      .def_readonly("image_h", &dataio::DatasetManifest::image_h)
      .def_readonly("image_w", &dataio::DatasetManifest::image_w)
      .def_readonly("seed", &dataio::DatasetManifest::seed)
      .def_readonly("positive_count", &dataio::DatasetManifest::positive_count)
      .def_readonly("split_boundary", &dataio::DatasetManifest::split_boundary);

  py::class_<dataio::Dataset>(m, "Dataset")
      .def_readonly("manifest", &dataio::Dataset::manifest)
      .def_readonly("records", &dataio::Dataset::records);

  m.def(
      "generate_dataset",
      [](int64_t count, uint64_t seed, int image_size, const std::string& out_dir,
         const worldsim::WorldParams& params) {
        dataio::GenParams g;
        g.count = count;
        g.seed = seed;
        g.image_size = image_size;
        return dataio::generate_dataset(params, g, out_dir);
      },
      py::arg("count"), py::arg("seed"), py::arg("image_size"), py::arg("out_dir"),
      py::arg("params") = worldsim::WorldParams{});
  m.def("load_dataset", &dataio::load_dataset, py::arg("dir"));
  m.def("sample_record_world", &dataio::sample_record_world, py::arg("seed"), py::arg("index"),
        py::arg("params") = worldsim::WorldParams{});
  m.def("split",
        [](int64_t count, double fraction, uint64_t seed) {
          return dataio::split(count, fraction, seed);
        });
  m.def("filter_by_occlusion", &dataio::filter_by_occlusion, py::arg("records"),
        py::arg("tau"));
  m.def("augment_record",
        [](const dataio::GraspRecord& r, int h, int w) { return dataio::augment_record(r, h, w); });

  // -- models / training ----------------------------------------------------------

  py::class_<models::Network>(m, "Network")
      .def_readonly("arch", &models::Network::arch)
      .def_readonly("image_hw", &models::Network::image_hw)
      .def("parameter_count",
           [](const models::Network& n) { return n.params.count_values(); });

  m.def("make_modelfree_net", &models::make_modelfree_net, py::arg("image_hw"),
        py::arg("init_seed"));
  m.def("make_surrogate_net", &models::make_surrogate_net, py::arg("image_hw"),
        py::arg("init_seed"));
  m.def("make_predictive_net", &models::make_predictive_net, py::arg("image_hw"),
        py::arg("init_seed"));
  m.def("save_network", &models::save_network, py::arg("net"), py::arg("path"));
  m.def("load_network", &models::load_network, py::arg("path"));

  m.def(
      "encode_command",
      [](const worldsim::GraspCommand& c, const worldsim::WorldParams& p) {
        auto e = models::encode_command(c, p);
        return std::vector<float>(e.begin(), e.end());
      },
      py::arg("command"), py::arg("params") = worldsim::WorldParams{});

  m.def(
      "modelfree_probs",
      [](models::Network& net, py::array_t<float, py::array::c_style | py::array::forcecast> img,
         const std::vector<worldsim::GraspCommand>& cmds, const worldsim::WorldParams& p) {
        tensornet::Tensor images = numpy_to_batch(img);
        tensornet::Tensor enc = models::encode_commands(commands_to_tensor(cmds), p);
        return probs_to_numpy(models::modelfree_probs(net, images, enc));
      },
      py::arg("net"), py::arg("images"), py::arg("commands"),
      py::arg("params") = worldsim::WorldParams{});
  m.def(
      "surrogate_probs",
      [](models::Network& net, py::array_t<float, py::array::c_style | py::array::forcecast> img) {
        return probs_to_numpy(models::surrogate_probs(net, numpy_to_batch(img)));
      },
      py::arg("net"), py::arg("images"));
  m.def(
      "predict_images",
      [](models::Network& net, py::array_t<float, py::array::c_style | py::array::forcecast> img,
         const std::vector<worldsim::GraspCommand>& cmds, const worldsim::WorldParams& p) {
        tensornet::Tensor images = numpy_to_batch(img);
        tensornet::Tensor enc = models::encode_commands(commands_to_tensor(cmds), p);
        models::PredictedImages out = models::predict_images(net, images, enc);
        return py::make_tuple(tensor_images_to_numpy(out.predicted),
                              tensor_images_to_numpy(out.mask));
      },
      py::arg("net"), py::arg("images"), py::arg("commands"),
      py::arg("params") = worldsim::WorldParams{});
  m.def(
      "pipeline_probs",
      [](models::Network& predictive, models::Network& estimator,
         py::array_t<float, py::array::c_style | py::array::forcecast> img,
         const std::vector<worldsim::GraspCommand>& cmds, const worldsim::WorldParams& p) {
        models::PipelineModel pipe{predictive, estimator};
        tensornet::Tensor images = numpy_to_batch(img);
        tensornet::Tensor enc = models::encode_commands(commands_to_tensor(cmds), p);
        return probs_to_numpy(models::pipeline_probs(pipe, images, enc));
      },
      py::arg("predictive"), py::arg("estimator"), py::arg("images"), py::arg("commands"),
      py::arg("params") = worldsim::WorldParams{});

  py::class_<trainbench::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &trainbench::TrainConfig::epochs)
      .def_readwrite("batch_size", &trainbench::TrainConfig::batch_size)
      .def_readwrite("learning_rate", &trainbench::TrainConfig::learning_rate)
      .def_readwrite("seed", &trainbench::TrainConfig::seed)
      .def_readwrite("augment", &trainbench::TrainConfig::augment)
      .def_readwrite("early_stop_patience", &trainbench::TrainConfig::early_stop_patience)
      .def_readwrite("occlusion_tau", &trainbench::TrainConfig::occlusion_tau);

  m.def(
      "train_classifier",
      [](models::Network& net, const dataio::RecordSet& records,
         const std::vector<int64_t>& train_idx, const std::vector<int64_t>& val_idx,
         const std::string& kind, const trainbench::TrainConfig& cfg,
         const worldsim::WorldParams& world) {
        trainbench::InputKind k;
        if (kind == "before_command") k = trainbench::InputKind::before_command;
        else if (kind == "during") k = trainbench::InputKind::during;
        else throw config_error("kind must be before_command or during");
        auto h = trainbench::train_classifier(net, records, train_idx, val_idx, k, cfg, world);
        py::dict d;
        d["train_loss"] = h.train_loss;
        d["best_epoch"] = h.best_epoch;
        d["best_val_accuracy"] = h.best_val_accuracy;
        return d;
      },
      py::arg("net"), py::arg("records"), py::arg("train_idx"), py::arg("val_idx"),
      py::arg("kind"), py::arg("config") = trainbench::TrainConfig{},
      py::arg("params") = worldsim::WorldParams{});
  m.def(
      "train_predictive",
      [](models::Network& net, const dataio::RecordSet& records,
         const std::vector<int64_t>& train_idx, const std::vector<int64_t>& val_idx,
         const trainbench::TrainConfig& cfg, const worldsim::WorldParams& world) {
        auto h = trainbench::train_predictive(net, records, train_idx, val_idx, cfg, world);
        py::dict d;
        d["train_loss"] = h.train_loss;
        d["val_mse"] = h.val_mse;
        d["best_epoch"] = h.best_epoch;
        d["best_val_mse"] = h.best_val_mse;
        return d;
      },
      py::arg("net"), py::arg("records"), py::arg("train_idx"), py::arg("val_idx"),
      py::arg("config") = trainbench::TrainConfig{},
      py::arg("params") = worldsim::WorldParams{});
  m.def(
      "evaluate",
      [](models::Network& net, const dataio::RecordSet& records,
         const std::vector<int64_t>& idx, const std::string& kind,
         const worldsim::WorldParams& world) {
        trainbench::InputKind k;
        if (kind == "before_command") k = trainbench::InputKind::before_command;
        else if (kind == "during") k = trainbench::InputKind::during;
        else throw config_error("kind must be before_command or during");
        return eval_to_dict(trainbench::evaluate(net, records, idx, k, world));
      },
      py::arg("net"), py::arg("records"), py::arg("idx"), py::arg("kind"),
      py::arg("params") = worldsim::WorldParams{});

  m.def(
      "run_comparison",
      [](const dataio::Dataset& ds, uint64_t seed, const trainbench::TrainConfig& model_free,
         const trainbench::TrainConfig& surrogate, const trainbench::TrainConfig& predictive,
         const trainbench::TrainConfig& pipeline_estimator, double train_fraction,
         const worldsim::WorldParams& world) {
        trainbench::ComparisonConfig cc;
        cc.model_free = model_free;
        cc.surrogate = surrogate;
        cc.predictive = predictive;
        cc.pipeline_estimator = pipeline_estimator;
        cc.train_fraction = train_fraction;
        cc.world = world;
        auto art = trainbench::run_comparison(ds, cc, seed);
        return report_to_dict(art.report);
      },
      py::arg("dataset"), py::arg("seed"), py::arg("model_free") = trainbench::TrainConfig{},
      py::arg("surrogate") = trainbench::TrainConfig{},
      py::arg("predictive") = trainbench::TrainConfig{},
      py::arg("pipeline_estimator") = trainbench::TrainConfig{},
      py::arg("train_fraction") = 0.9, py::arg("params") = worldsim::WorldParams{});

  // module-level error translation
  py::register_exception<config_error>(m, "ConfigError");
  py::register_exception<io_error>(m, "IoError");
  py::register_exception<numeric_error>(m, "NumericError");
  py::register_exception<shape_error>(m, "ShapeError");
}
