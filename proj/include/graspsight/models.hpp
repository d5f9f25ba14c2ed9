#pragma once

// The three estimators and their composition: a model-free classifier over
// (before image, command), a surrogate classifier over a single observation,
// an image-predictive encoder/decoder with a compositing-mask skip
// connection, and the pipeline that chains prediction into the surrogate.

#include <array>
#include <string>

#include "graspsight/tensornet.hpp"
#include "graspsight/worldsim.hpp"

namespace gs::models {

using tensornet::Network;
using tensornet::Tensor;
using FloatTape = tensornet::Tape<float>;
using Ref = FloatTape::Ref;

inline constexpr int kCommandDim = 5;

// (x,y scaled to [-1,1] over the bin, sin theta, cos theta, aperture/a_max).
std::array<float, kCommandDim> encode_command(const worldsim::GraspCommand& c,
                                              const worldsim::WorldParams& params);

// raw [N,4] -> encoded [N,5]
Tensor encode_commands(const Tensor& raw, const worldsim::WorldParams& params);

// -- builders ----------------------------------------------------------------
// Trunk: 4 conv blocks (3x3, channels 16/32/64/64, relu + maxpool each),
// dense 128, sigmoid head. image_hw must be a multiple of 16.

Network make_modelfree_net(int image_hw, uint64_t init_seed);
Network make_surrogate_net(int image_hw, uint64_t init_seed);
Network make_predictive_net(int image_hw, uint64_t init_seed);

// -- tape forwards (training and inference share these) ----------------------

// Probability node [N,1]; image [N,1,H,W], cmd [N,5].
Ref modelfree_forward(FloatTape& tape, Network& net, Ref image, Ref cmd);
Ref surrogate_forward(FloatTape& tape, Network& net, Ref image);

enum class MaskMode { learned, force_ones, force_zeros };

struct PredictiveOut {
  Ref predicted;  // [N,1,H,W], mask*before + (1-mask)*generated
  Ref mask;
  Ref generated;
};

PredictiveOut predictive_forward(FloatTape& tape, Network& net, Ref image, Ref cmd,
                                 MaskMode mode = MaskMode::learned);

// -- frozen-model conveniences ------------------------------------------------

Tensor modelfree_probs(Network& net, const Tensor& images, const Tensor& cmd);
Tensor surrogate_probs(Network& net, const Tensor& images);

struct PredictedImages {
  Tensor predicted;
  Tensor mask;
};
PredictedImages predict_images(Network& net, const Tensor& images, const Tensor& cmd,
                               MaskMode mode = MaskMode::learned);

struct PipelineModel {
  Network predictive;
  Network estimator;
};

// Deployment dataflow: only the before image and the command go in.
Tensor pipeline_probs(PipelineModel& model, const Tensor& images, const Tensor& cmd);

// -- checkpoint wiring --------------------------------------------------------

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace gs::models
