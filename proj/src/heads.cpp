#include "egopack/heads.hpp"

namespace egopack {

HeadLayout init_head(nn::ParamSet& params, const std::string& ns, int in_dim, int head_dim,
                     const std::vector<int>& output_dims, uint64_t seed) {
    HeadLayout h;
    h.w1 = params.add(ns + "/mlp/w1", nn::glorot_uniform(in_dim, head_dim, seed, ns + "/mlp/w1"));
    h.b1 = params.add(ns + "/mlp/b1", Tensor(1, head_dim));
    h.w2 = params.add(ns + "/mlp/w2", nn::glorot_uniform(head_dim, head_dim, seed, ns + "/mlp/w2"));
    h.b2 = params.add(ns + "/mlp/b2", Tensor(1, head_dim));
    for (size_t o = 0; o < output_dims.size(); ++o) {
        const std::string cn = ns + "/out" + std::to_string(o);
        HeadLayout::Classifier c;
        c.dim = output_dims[o];
        c.w = params.add(cn + "/w", nn::glorot_uniform(head_dim, c.dim, seed, cn + "/w"));
        c.b = params.add(cn + "/b", Tensor(1, c.dim));
        h.outs.push_back(c);
    }
    return h;
}

nn::ValId head_features(nn::Tape& t, nn::ValId node_feats, const HeadLayout& head,
                        double leaky_slope) {
    const nn::ValId h1 =
        t.leaky_relu(t.add_row(t.matmul(node_feats, t.param(head.w1)), t.param(head.b1)), leaky_slope);
    return t.add_row(t.matmul(h1, t.param(head.w2)), t.param(head.b2));
}

nn::ValId graph_max_pool(nn::Tape& t, nn::ValId node_feats, const std::vector<int>& rows) {
    if (rows.empty()) throw ShapeError("graph_max_pool over empty node selection");
    return t.max_pool_rows(node_feats, rows);
}

nn::ValId head_logits(nn::Tape& t, nn::ValId task_feats, const HeadLayout& head, int out_index) {
    const auto& c = head.outs[static_cast<size_t>(out_index)];
    return t.add_row(t.matmul(task_feats, t.param(c.w)), t.param(c.b));
}

nn::ValId classification_loss(nn::Tape& t, const std::vector<nn::ValId>& per_out_logits,
                              const std::vector<std::vector<int>>& per_out_labels) {
    if (per_out_logits.empty() || per_out_logits.size() != per_out_labels.size())
        throw ShapeError("classification_loss: logits/labels arity mismatch");
    nn::ValId total = -1;
    for (size_t o = 0; o < per_out_logits.size(); ++o) {
        const nn::ValId ce = t.softmax_cross_entropy(per_out_logits[o], per_out_labels[o]);
        total = (o == 0) ? ce : t.add(total, ce);
    }
    return t.scale(total, 1.0 / static_cast<double>(per_out_logits.size()));
}

nn::ValId pnr_loss(nn::Tape& t, nn::ValId node_logits, const std::vector<int>& node_labels) {
    const Tensor& v = t.value(node_logits);
    if (v.cols != 1 || v.rows != static_cast<int>(node_labels.size()))
        throw ShapeError("pnr_loss: expected one scalar logit per node");
    Tensor targets(v.rows, 1);
    for (int r = 0; r < v.rows; ++r) targets.at(r, 0) = node_labels[static_cast<size_t>(r)];
    return t.bce_with_logits(node_logits, std::move(targets));
}

nn::ValId masked_classification_loss(nn::Tape& t, const std::vector<nn::ValId>& per_out_logits,
                                     const std::vector<std::vector<int>>& per_node_labels,
                                     const std::vector<char>& target_mask) {
    std::vector<int> rows;
    for (size_t i = 0; i < target_mask.size(); ++i)
        if (target_mask[i]) rows.push_back(static_cast<int>(i));
    if (rows.empty()) throw ShapeError("masked_classification_loss: no target nodes");
    std::vector<nn::ValId> selected;
    std::vector<std::vector<int>> labels;
    for (size_t o = 0; o < per_out_logits.size(); ++o) {
        selected.push_back(t.select_rows(per_out_logits[o], rows));
        std::vector<int> l;
        for (int r : rows) l.push_back(per_node_labels[o][static_cast<size_t>(r)]);
        labels.push_back(std::move(l));
    }
    return classification_loss(t, selected, labels);
}

}  // namespace egopack
