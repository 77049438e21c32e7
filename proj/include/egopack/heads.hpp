#pragma once

#include <string>
#include <vector>

#include "egopack/graph.hpp"
#include "egopack/nn.hpp"

namespace egopack {

// Task head: two-layer MLP (D_t -> D_k -> D_k, LeakyReLU between) producing
// the task features, plus one linear classifier per output space.
struct HeadLayout {
    int w1 = -1, b1 = -1;
    int w2 = -1, b2 = -1;
    struct Classifier {
        int w = -1, b = -1;
        int dim = 0;
    };
    std::vector<Classifier> outs;
};

HeadLayout init_head(nn::ParamSet& params, const std::string& ns, int in_dim, int head_dim,
                     const std::vector<int>& output_dims, uint64_t seed);

// Task-specific features f^k for the given node rows (no pooling).
nn::ValId head_features(nn::Tape& t, nn::ValId node_feats, const HeadLayout& head,
                        double leaky_slope);

// Coordinate-wise max over the selected node rows (1 x D).
nn::ValId graph_max_pool(nn::Tape& t, nn::ValId node_feats, const std::vector<int>& rows);

// Logits for output head `out_index`.
nn::ValId head_logits(nn::Tape& t, nn::ValId task_feats, const HeadLayout& head, int out_index);

// Task losses over per-target logits:
//   ar/lta: mean of verb CE and noun CE over the target nodes,
//   oscc:   2-way CE on the pooled graph logits,
//   pnr:    mean per-node BCE against the one-hot keyframe vector.
nn::ValId classification_loss(nn::Tape& t, const std::vector<nn::ValId>& per_out_logits,
                              const std::vector<std::vector<int>>& per_out_labels);
nn::ValId pnr_loss(nn::Tape& t, nn::ValId node_logits, const std::vector<int>& node_labels);

// Loss over full per-node logits with a target mask; selects the masked rows
// before computing the loss, so non-target logits never contribute.
nn::ValId masked_classification_loss(nn::Tape& t, const std::vector<nn::ValId>& per_out_logits,
                                     const std::vector<std::vector<int>>& per_node_labels,
                                     const std::vector<char>& target_mask);

}  // namespace egopack
