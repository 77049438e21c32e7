#pragma once

#include <string>
#include <vector>

#include "egopack/graph.hpp"
#include "egopack/nn.hpp"

namespace egopack {

struct BackboneConfig {
    int layers = 3;        // L
    int input_dim = 64;    // D
    int hidden_dim = 64;   // D_t
    double leaky_slope = 0.01;
    double ln_eps = 1e-5;

    void validate() const;
};

// Parameter indices for one SAGE layer plus its LayerNorm.
struct SageLayerLayout {
    int w_r = -1;   // root weight, D_t x D_t (stored input x output)
    int w = -1;     // neighbor-aggregate weight
    int w_p = -1;   // neighbor projection applied before aggregation
    int b = -1;
    int b_p = -1;
    int ln_gain = -1;
    int ln_bias = -1;
};

struct BackboneLayout {
    int in_proj_w = -1;  // only when input_dim != hidden_dim
    int in_proj_b = -1;
    std::vector<SageLayerLayout> layers;
};

BackboneLayout init_backbone(nn::ParamSet& params, const BackboneConfig& cfg, uint64_t seed,
                             const std::string& ns = "backbone");

// One SAGE update: f_i' = W_r f_i + W * mean_j phi(W_p f_j + b_p) + b, with
// neighbor means taken over the rows of `nbr_mean` (zero row = no neighbors).
nn::ValId sage_layer(nn::Tape& t, nn::ValId feats, nn::ValId nbr_mean,
                     const SageLayerLayout& layer, double leaky_slope);

// h0 = input projection (identity when D == D_t); then L blocks of
// [sage -> layer_norm -> leaky_relu]; output = h0 + stack(h0).
nn::ValId backbone_forward(nn::Tape& t, nn::ValId features_with_pe, const Tensor& nbr_mean,
                           const BackboneConfig& cfg, const BackboneLayout& layout);

}  // namespace egopack
