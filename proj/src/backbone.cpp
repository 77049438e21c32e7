#include "egopack/backbone.hpp"

namespace egopack {

void BackboneConfig::validate() const {
    if (layers < 1) throw ConfigError("backbone layers must be >= 1");
    if (input_dim < 1 || hidden_dim < 1) throw ConfigError("backbone widths must be positive");
}

BackboneLayout init_backbone(nn::ParamSet& params, const BackboneConfig& cfg, uint64_t seed,
                             const std::string& ns) {
    cfg.validate();
    BackboneLayout layout;
    if (cfg.input_dim != cfg.hidden_dim) {
        layout.in_proj_w = params.add(
            ns + "/in_proj/w",
            nn::glorot_uniform(cfg.input_dim, cfg.hidden_dim, seed, ns + "/in_proj/w"));
        layout.in_proj_b = params.add(ns + "/in_proj/b", Tensor(1, cfg.hidden_dim));
    }
    const int d = cfg.hidden_dim;
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = ns + "/layer" + std::to_string(l);
        SageLayerLayout sl;
        sl.w_r = params.add(p + "/w_r", nn::glorot_uniform(d, d, seed, p + "/w_r"));
        sl.w = params.add(p + "/w", nn::glorot_uniform(d, d, seed, p + "/w"));
        sl.w_p = params.add(p + "/w_p", nn::glorot_uniform(d, d, seed, p + "/w_p"));
        sl.b = params.add(p + "/b", Tensor(1, d));
        sl.b_p = params.add(p + "/b_p", Tensor(1, d));
        sl.ln_gain = params.add(p + "/ln_gain", Tensor(1, d, 1.0));
        sl.ln_bias = params.add(p + "/ln_bias", Tensor(1, d));
        layout.layers.push_back(sl);
    }
    return layout;
}

nn::ValId sage_layer(nn::Tape& t, nn::ValId feats, nn::ValId nbr_mean,
                     const SageLayerLayout& layer, double leaky_slope) {
    const nn::ValId projected =
        t.leaky_relu(t.add_row(t.matmul(feats, t.param(layer.w_p)), t.param(layer.b_p)), leaky_slope);
    const nn::ValId aggregated = t.matmul(nbr_mean, projected);
    const nn::ValId root = t.matmul(feats, t.param(layer.w_r));
    const nn::ValId message = t.matmul(aggregated, t.param(layer.w));
    return t.add_row(t.add(root, message), t.param(layer.b));
}

nn::ValId backbone_forward(nn::Tape& t, nn::ValId features_with_pe, const Tensor& nbr_mean,
                           const BackboneConfig& cfg, const BackboneLayout& layout) {
    nn::ValId h0 = features_with_pe;
    if (layout.in_proj_w >= 0)
        h0 = t.add_row(t.matmul(features_with_pe, t.param(layout.in_proj_w)),
                       t.param(layout.in_proj_b));
    const nn::ValId adj = t.leaf(nbr_mean);

    nn::ValId h = h0;
    for (size_t l = 0; l < layout.layers.size(); ++l) {
        const auto& sl = layout.layers[l];
        h = sage_layer(t, h, adj, sl, cfg.leaky_slope);
        h = t.layer_norm(h, t.param(sl.ln_gain), t.param(sl.ln_bias), cfg.ln_eps);
        h = t.leaky_relu(h, cfg.leaky_slope);
        if (!t.value(h).finite())
            throw NumericError("non-finite backbone activations at layer " + std::to_string(l));
    }
    return t.add(h0, h);
}

}  // namespace egopack
