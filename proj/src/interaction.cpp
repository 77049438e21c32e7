#include "egopack/interaction.hpp"

#include <algorithm>

#include "egopack/common.hpp"

namespace egopack {

void InteractionConfig::validate() const {
    if (depth < 1) throw ConfigError("interaction.depth must be >= 1");
    if (k < 0) throw ConfigError("interaction.k must be >= 0");
}

InteractionTaskLayout init_interaction_task(nn::ParamSet& params, const std::string& task,
                                            int head_dim, const std::vector<int>& novel_output_dims,
                                            int depth, uint64_t seed) {
    InteractionTaskLayout layout;
    for (int l = 0; l < depth; ++l) {
        const std::string p = "interaction/" + task + "/layer" + std::to_string(l);
        InteractionTaskLayout::Layer layer;
        layer.w_r = params.add(p + "/w_r", nn::glorot_uniform(head_dim, head_dim, seed, p + "/w_r"));
        layer.w = params.add(p + "/w", nn::glorot_uniform(head_dim, head_dim, seed, p + "/w"));
        layout.layers.push_back(layer);
    }
    for (size_t o = 0; o < novel_output_dims.size(); ++o) {
        const std::string p = "interaction/" + task + "/vote" + std::to_string(o);
        InteractionTaskLayout::Vote vote;
        vote.dim = novel_output_dims[o];
        vote.w = params.add(p + "/w", nn::glorot_uniform(head_dim, vote.dim, seed, p + "/w"));
        vote.b = params.add(p + "/b", Tensor(1, vote.dim));
        layout.votes.push_back(vote);
    }
    return layout;
}

nn::ValId interaction_layer(nn::Tape& t, nn::ValId feats, const PrototypeBank& bank,
                            const InteractionTaskLayout::Layer& layer, int k, NeighborLog* log,
                            int layer_index) {
    if (!bank.frozen) throw ConfigError("interaction_layer: bank must be frozen");
    const Tensor& f = t.value(feats);
    if (f.cols != bank.dim) throw ShapeError("interaction_layer: feature width does not match bank");

    // Per-row neighbor selection on the current values; the resulting max
    // matrix enters the tape as a constant, so no gradient reaches the bank.
    Tensor maxes(f.rows, f.cols);
    for (int r = 0; r < f.rows; ++r) {
        const std::vector<int> nbrs = knn_cosine(f.row_ptr(r), f.cols, bank, k);
        if (log) log->entries.push_back({bank.task, layer_index, nbrs});
        for (int c = 0; c < f.cols; ++c) {
            double m = bank.row_ptr(nbrs[0])[c];
            for (size_t i = 1; i < nbrs.size(); ++i)
                m = std::max(m, static_cast<double>(bank.row_ptr(nbrs[i])[c]));
            maxes.at(r, c) = m;
        }
    }
    const nn::ValId root = t.matmul(feats, t.param(layer.w_r));
    const nn::ValId message = t.matmul(t.leaf(std::move(maxes)), t.param(layer.w));
    return t.add(root, message);
}

nn::ValId refine_features(nn::Tape& t, nn::ValId feats, const PrototypeBank& bank,
                          const InteractionTaskLayout& layout, int depth, int k, NeighborLog* log) {
    if (depth > static_cast<int>(layout.layers.size()))
        throw ConfigError("refine_features: depth exceeds interaction layers");
    nn::ValId f = feats;
    for (int l = 0; l < depth; ++l)
        f = interaction_layer(t, f, bank, layout.layers[static_cast<size_t>(l)], k, log, l);
    return f;
}

nn::ValId fuse_predictions(nn::Tape& t, const std::vector<nn::ValId>& vote_logits,
                           nn::ValId novel_logits) {
    nn::ValId fused = novel_logits;
    for (nn::ValId v : vote_logits) {
        if (!t.value(v).same_shape(t.value(novel_logits)))
            throw ShapeError("fuse_predictions: vote and novel logits must share the output space");
        fused = t.add(fused, v);
    }
    return fused;
}

}  // namespace egopack
