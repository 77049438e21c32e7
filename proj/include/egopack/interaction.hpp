#pragma once

#include <string>
#include <vector>

#include "egopack/nn.hpp"
#include "egopack/prototypes.hpp"

namespace egopack {

struct InteractionConfig {
    int depth = 3;
    int k = 4;  // k = 0 disables the interaction stage entirely
    std::vector<std::string> backpack;

    void validate() const;
};

// Per backpack task: one (W_r, W) pair per layer plus a vote classifier per
// novel output space.
struct InteractionTaskLayout {
    struct Layer {
        int w_r = -1;
        int w = -1;
    };
    std::vector<Layer> layers;
    struct Vote {
        int w = -1, b = -1;
        int dim = 0;
    };
    std::vector<Vote> votes;
};

InteractionTaskLayout init_interaction_task(nn::ParamSet& params, const std::string& task,
                                            int head_dim, const std::vector<int>& novel_output_dims,
                                            int depth, uint64_t seed);

// Records which prototype rows each query selected, per layer.
struct NeighborLog {
    struct Entry {
        std::string task;
        int layer = 0;
        std::vector<int> rows;
    };
    std::vector<Entry> entries;
};

// One interaction update: neighbors are re-selected from the frozen bank via
// cosine k-NN on the current feature values, then
//   f' = f W_r + max(selected prototypes) W.
// Gradient flows through f and the weights only; the bank is a constant.
nn::ValId interaction_layer(nn::Tape& t, nn::ValId feats, const PrototypeBank& bank,
                            const InteractionTaskLayout::Layer& layer, int k,
                            NeighborLog* log = nullptr, int layer_index = 0);

// depth applications of interaction_layer against one task's bank.
nn::ValId refine_features(nn::Tape& t, nn::ValId feats, const PrototypeBank& bank,
                          const InteractionTaskLayout& layout, int depth, int k,
                          NeighborLog* log = nullptr);

// Element-wise sum of the novel head's logits and every task's vote logits.
nn::ValId fuse_predictions(nn::Tape& t, const std::vector<nn::ValId>& vote_logits,
                           nn::ValId novel_logits);

}  // namespace egopack
