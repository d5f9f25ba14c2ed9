#include "graspsight/models.hpp"

#include <cmath>

#include "graspsight/errors.hpp"
#include "graspsight/rng.hpp"

namespace gs::models {

using tensornet::he_uniform;
using tensornet::LayerDesc;
using tensornet::LayerKind;
using tensornet::NamedTensor;

namespace {

void add_conv(Network& net, const std::string& name, int out_ch, int in_ch, Rng& rng) {
  net.params.add(name + "/w", he_uniform<float>({out_ch, in_ch, 3, 3}, in_ch * 9, rng));
  net.params.add(name + "/b", Tensor::zeros({out_ch}));
  net.layers.push_back({LayerKind::conv2d, name, out_ch, 3, 1, 1, 0});
}

void add_dense(Network& net, const std::string& name, int out, int in, Rng& rng) {
  net.params.add(name + "/w", he_uniform<float>({out, in}, in, rng));
  net.params.add(name + "/b", Tensor::zeros({out}));
  net.layers.push_back({LayerKind::dense, name, 0, 0, 1, 0, out});
}

void check_hw(int image_hw) {
  if (image_hw < 16 || image_hw % 16 != 0)
    throw shape_error("image size must be a positive multiple of 16, got " +
                      std::to_string(image_hw));
}

Ref conv_block(FloatTape& t, Network& net, const std::string& name, Ref x) {
  Ref c = t.conv2d(x, t.param(net.params.at(name + "/w")), t.param(net.params.at(name + "/b")),
                   1, 1);
  return t.maxpool2x2(t.relu(c));
}

Ref conv_relu(FloatTape& t, Network& net, const std::string& name, Ref x) {
  Ref c = t.conv2d(x, t.param(net.params.at(name + "/w")), t.param(net.params.at(name + "/b")),
                   1, 1);
  return t.relu(c);
}

Ref dense_layer(FloatTape& t, Network& net, const std::string& name, Ref x) {
  return t.dense(x, t.param(net.params.at(name + "/w")), t.param(net.params.at(name + "/b")));
}

// Fixed [-1,1] coordinate planes; gives the decoder a spatial reference so
// tiled command channels can be turned into a sprite at the right place.
Ref coord_planes(FloatTape& t, int n, int hw) {
  Tensor c({n, 2, hw, hw});
  for (int i = 0; i < hw; ++i)
    for (int j = 0; j < hw; ++j) {
      float cx = 2.0f * (float(j) + 0.5f) / float(hw) - 1.0f;
      float cy = 2.0f * (float(i) + 0.5f) / float(hw) - 1.0f;
      for (int s = 0; s < n; ++s) {
        c.data[((size_t(s) * 2 + 0) * hw + i) * hw + j] = cx;
        c.data[((size_t(s) * 2 + 1) * hw + i) * hw + j] = cy;
      }
    }
  return t.constant(std::move(c));
}

Ref classifier_head(FloatTape& t, Network& net, Ref features) {
  Ref flat = t.flatten(features);
  Ref d1 = t.relu(dense_layer(t, net, "dense1", flat));
  return t.sigmoid(dense_layer(t, net, "head", d1));
}

// Shared trunk wiring for both classifiers; the model-free variant splices
// the tiled command after the first block.
Ref classifier_trunk(FloatTape& t, Network& net, Ref image, Ref cmd_or_minus1) {
  Ref b1 = conv_block(t, net, "conv1", image);
  Ref x = b1;
  if (cmd_or_minus1 >= 0) {
    int hw = t.value(b1).shape[2];
    Ref tiled = t.tile_vector_to_channels(cmd_or_minus1, hw, hw);
    x = t.concat_channels(b1, tiled);
  }
  Ref b2 = conv_block(t, net, "conv2", x);
  Ref b3 = conv_block(t, net, "conv3", b2);
  Ref b4 = conv_block(t, net, "conv4", b3);
  return classifier_head(t, net, b4);
}

}  // namespace

std::array<float, kCommandDim> encode_command(const worldsim::GraspCommand& c,
                                              const worldsim::WorldParams& params) {
  double extent = params.bin_extent();
  std::array<float, kCommandDim> e;
  e[0] = float(2.0 * (c.x - params.bin_min) / extent - 1.0);
  e[1] = float(2.0 * (c.y - params.bin_min) / extent - 1.0);
  e[2] = float(std::sin(c.theta));
  e[3] = float(std::cos(c.theta));
  e[4] = float(c.aperture / params.aperture_max);
  return e;
}

Tensor encode_commands(const Tensor& raw, const worldsim::WorldParams& params) {
  if (raw.ndim() != 2 || raw.dim(1) != 4)
    throw shape_error("encode_commands: expected [N,4], got " + raw.shape_str());
  int n = raw.dim(0);
  Tensor out({n, kCommandDim});
  for (int i = 0; i < n; ++i) {
    const float* r = raw.ptr() + int64_t(i) * 4;
    worldsim::GraspCommand c{r[0], r[1], r[2], r[3]};
    auto e = encode_command(c, params);
    std::copy(e.begin(), e.end(), out.ptr() + int64_t(i) * kCommandDim);
  }
  return out;
}

Network make_modelfree_net(int image_hw, uint64_t init_seed) {
  check_hw(image_hw);
  Network net;
  net.arch = "modelfree_v1";
  net.image_hw = image_hw;
  Rng rng(derive_seed(init_seed, 0x90DE1ull));
  add_conv(net, "conv1", 16, 1, rng);
  add_conv(net, "conv2", 32, 16 + kCommandDim, rng);
  add_conv(net, "conv3", 64, 32, rng);
  add_conv(net, "conv4", 64, 64, rng);
  int flat = 64 * (image_hw / 16) * (image_hw / 16);
  add_dense(net, "dense1", 128, flat, rng);
  add_dense(net, "head", 1, 128, rng);
  return net;
}

Network make_surrogate_net(int image_hw, uint64_t init_seed) {
  check_hw(image_hw);
  Network net;
  net.arch = "surrogate_v1";
  net.image_hw = image_hw;
  Rng rng(derive_seed(init_seed, 0x5A40Cull));
  add_conv(net, "conv1", 16, 1, rng);
  add_conv(net, "conv2", 32, 16, rng);
  add_conv(net, "conv3", 64, 32, rng);
  add_conv(net, "conv4", 64, 64, rng);
  int flat = 64 * (image_hw / 16) * (image_hw / 16);
  add_dense(net, "dense1", 128, flat, rng);
  add_dense(net, "head", 1, 128, rng);
  return net;
}

Network make_predictive_net(int image_hw, uint64_t init_seed) {
  check_hw(image_hw);
  Network net;
  net.arch = "predictive_v1";
  net.image_hw = image_hw;
  Rng rng(derive_seed(init_seed, 0x94ED1ull));
  add_conv(net, "enc1", 16, 1, rng);
  add_conv(net, "enc2", 32, 16, rng);
  add_conv(net, "enc3", 64, 32, rng);
  add_conv(net, "enc4", 64, 64, rng);
  add_conv(net, "bneck", 64, 64 + kCommandDim + 2, rng);
  add_conv(net, "dec1", 48, 64 + kCommandDim + 2, rng);
  add_conv(net, "dec2", 32, 48 + kCommandDim + 2, rng);
  add_conv(net, "dec3", 16, 32 + kCommandDim + 2, rng);
  add_conv(net, "dec4", 16, 16 + kCommandDim + 2, rng);
  add_conv(net, "head", 2, 16, rng);
  return net;
}

Ref modelfree_forward(FloatTape& tape, Network& net, Ref image, Ref cmd) {
  if (net.arch != "modelfree_v1")
    throw shape_error("modelfree_forward: network arch is " + net.arch);
  const auto& vi = tape.value(image);
  if (vi.ndim() != 4 || vi.dim(1) != 1 || vi.dim(2) != net.image_hw ||
      vi.dim(3) != net.image_hw)
    throw shape_error("modelfree_forward: image must be [N,1," +
                      std::to_string(net.image_hw) + "," + std::to_string(net.image_hw) +
                      "], got " + vi.shape_str());
  const auto& vc = tape.value(cmd);
  if (vc.ndim() != 2 || vc.dim(0) != vi.dim(0) || vc.dim(1) != kCommandDim)
    throw shape_error("modelfree_forward: command must be [N,5], got " + vc.shape_str());
  return classifier_trunk(tape, net, image, cmd);
}

Ref surrogate_forward(FloatTape& tape, Network& net, Ref image) {
  if (net.arch != "surrogate_v1")
    throw shape_error("surrogate_forward: network arch is " + net.arch);
  const auto& vi = tape.value(image);
  if (vi.ndim() != 4 || vi.dim(1) != 1 || vi.dim(2) != net.image_hw ||
      vi.dim(3) != net.image_hw)
    throw shape_error("surrogate_forward: image must be [N,1," +
                      std::to_string(net.image_hw) + "," + std::to_string(net.image_hw) +
                      "], got " + vi.shape_str());
  return classifier_trunk(tape, net, image, -1);
}

PredictiveOut predictive_forward(FloatTape& tape, Network& net, Ref image, Ref cmd,
                                 MaskMode mode) {
  if (net.arch != "predictive_v1")
    throw shape_error("predictive_forward: network arch is " + net.arch);
  const auto& vi = tape.value(image);
  if (vi.ndim() != 4 || vi.dim(1) != 1 || vi.dim(2) != net.image_hw ||
      vi.dim(3) != net.image_hw)
    throw shape_error("predictive_forward: image must be [N,1," +
                      std::to_string(net.image_hw) + "," + std::to_string(net.image_hw) +
                      "], got " + vi.shape_str());
  const auto& vc = tape.value(cmd);
  if (vc.ndim() != 2 || vc.dim(0) != vi.dim(0) || vc.dim(1) != kCommandDim)
    throw shape_error("predictive_forward: command must be [N,5], got " + vc.shape_str());
  int n = vi.dim(0);

  Ref e1 = conv_block(tape, net, "enc1", image);
  Ref e2 = conv_block(tape, net, "enc2", e1);
  Ref e3 = conv_block(tape, net, "enc3", e2);
  Ref e4 = conv_block(tape, net, "enc4", e3);

  auto fuse = [&](Ref x) {
    // copy dims: pushing nodes reallocates the tape's storage
    int hw = tape.value(x).shape[2];
    Ref tiled = tape.tile_vector_to_channels(cmd, hw, hw);
    Ref withcmd = tape.concat_channels(x, tiled);
    return tape.concat_channels(withcmd, coord_planes(tape, n, hw));
  };

  Ref b = conv_relu(tape, net, "bneck", fuse(e4));
  Ref d1 = conv_relu(tape, net, "dec1", fuse(tape.upsample2x(b)));
  Ref d2 = conv_relu(tape, net, "dec2", fuse(tape.upsample2x(d1)));
  Ref d3 = conv_relu(tape, net, "dec3", fuse(tape.upsample2x(d2)));
  Ref d4 = conv_relu(tape, net, "dec4", fuse(tape.upsample2x(d3)));
  Ref head = tape.sigmoid(tape.conv2d(d4, tape.param(net.params.at("head/w")),
                                      tape.param(net.params.at("head/b")), 1, 1));

  PredictiveOut out;
  out.generated = tape.slice_channel(head, 0);
  out.mask = tape.slice_channel(head, 1);
  if (mode == MaskMode::force_ones) {
    out.mask = tape.constant(Tensor::full({n, 1, net.image_hw, net.image_hw}, 1.0f));
  } else if (mode == MaskMode::force_zeros) {
    out.mask = tape.constant(Tensor::zeros({n, 1, net.image_hw, net.image_hw}));
  }
  // predicted = mask*before + (1-mask)*generated
  Ref keep = tape.mul(out.mask, image);
  Ref paint = tape.mul(tape.one_minus(out.mask), out.generated);
  out.predicted = tape.add(keep, paint);
  return out;
}

Tensor modelfree_probs(Network& net, const Tensor& images, const Tensor& cmd) {
  FloatTape t;
  Ref p = modelfree_forward(t, net, t.input(images), t.input(cmd));
  return t.value(p);
}

Tensor surrogate_probs(Network& net, const Tensor& images) {
  FloatTape t;
  Ref p = surrogate_forward(t, net, t.input(images));
  return t.value(p);
}

PredictedImages predict_images(Network& net, const Tensor& images, const Tensor& cmd,
                               MaskMode mode) {
  FloatTape t;
  PredictiveOut o = predictive_forward(t, net, t.input(images), t.input(cmd), mode);
  return {t.value(o.predicted), t.value(o.mask)};
}

Tensor pipeline_probs(PipelineModel& model, const Tensor& images, const Tensor& cmd) {
  PredictedImages h = predict_images(model.predictive, images, cmd);
  return surrogate_probs(model.estimator, h.predicted);
}

void save_network(const Network& net, const std::string& path) {
  std::vector<NamedTensor> tensors;
  tensors.push_back({"meta/arch/" + net.arch, Tensor({1}, {float(net.image_hw)})});
  for (size_t i = 0; i < net.params.size(); ++i)
    tensors.push_back({net.params.names[i], net.params.params[i].value});
  tensornet::save_checkpoint(tensors, path);
}

Network load_network(const std::string& path) {
  auto tensors = tensornet::load_checkpoint(path);
  std::string arch;
  int image_hw = 0;
  for (const auto& nt : tensors)
    if (nt.name.rfind("meta/arch/", 0) == 0) {
      arch = nt.name.substr(10);
      image_hw = int(nt.tensor.data.empty() ? 0 : nt.tensor[0]);
    }
  if (arch.empty()) throw io_error("checkpoint " + path + " carries no architecture tag");

  Network net;
  if (arch == "modelfree_v1")
    net = make_modelfree_net(image_hw, 0);
  else if (arch == "surrogate_v1")
    net = make_surrogate_net(image_hw, 0);
  else if (arch == "predictive_v1")
    net = make_predictive_net(image_hw, 0);
  else
    throw io_error("checkpoint " + path + " has unknown architecture " + arch);

  for (size_t i = 0; i < net.params.size(); ++i) {
    const std::string& name = net.params.names[i];
    bool found = false;
    for (const auto& nt : tensors) {
      if (nt.name != name) continue;
      found = true;
      auto& p = net.params.params[i];
      if (nt.tensor.shape != p.value.shape)
        throw shape_error("checkpoint tensor " + name + " has shape " +
                          nt.tensor.shape_str() + ", expected " + p.value.shape_str());
      p.value = nt.tensor;
      break;
    }
    if (!found) throw io_error("checkpoint " + path + " is missing tensor " + name);
  }
  return net;
}

}  // namespace gs::models
