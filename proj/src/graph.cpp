#include "egopack/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "egopack/common.hpp"
#include "json.hpp"

namespace egopack {

TaskSpec make_task_spec(const std::string& name, const Vocab& vocab, const GraphParams& gp,
                        int head_dim) {
    TaskSpec spec;
    spec.name = name;
    spec.head_dim = head_dim;
    spec.graph = gp;
    const int verbs = static_cast<int>(vocab.verbs.size());
    const int nouns = static_cast<int>(vocab.nouns.size());
    if (name == "ar") {
        spec.kind = TaskKind::node_classification;
        spec.output_dims = {verbs, nouns};
    } else if (name == "lta") {
        spec.kind = TaskKind::future_node_classification;
        spec.output_dims = {verbs, nouns};
    } else if (name == "oscc") {
        spec.kind = TaskKind::graph_classification;
        spec.output_dims = {2};
    } else if (name == "pnr") {
        spec.kind = TaskKind::node_localization;
        spec.output_dims = {1};
    } else {
        throw ConfigError("unknown task: " + name);
    }
    for (int d : spec.output_dims)
        if (d <= 0) throw ConfigError("task " + name + " has non-positive output dim");
    return spec;
}

std::vector<int> TemporalGraph::target_indices() const {
    std::vector<int> idx;
    for (size_t i = 0; i < target_mask.size(); ++i)
        if (target_mask[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

void TemporalGraph::validate() const {
    const int m = num_nodes();
    if (m < 1) throw SchemaError("graph must have at least one node");
    if (static_cast<int>(node_position.size()) != m || static_cast<int>(node_role.size()) != m ||
        static_cast<int>(target_mask.size()) != m)
        throw SchemaError("graph per-node arrays out of sync");
    std::set<std::pair<int, int>> seen;
    for (auto [i, j] : edges) {
        if (i < 0 || i >= m || j < 0 || j >= m) throw SchemaError("edge references invalid node");
        if (i == j) throw SchemaError("self-loop edge");
        seen.insert({i, j});
    }
    for (auto [i, j] : seen)
        if (!seen.count({j, i})) throw SchemaError("edge missing symmetric pair");
    if (seen.size() != edges.size()) throw SchemaError("duplicate edge entries");
    if (!node_features.finite()) throw SchemaError("non-finite node features");
}

Tensor span_mean_feature(const FeatureSequence& seq, double start, double end) {
    Tensor mean(1, seq.features.cols);
    int count = 0;
    for (int r = 0; r < seq.features.rows; ++r) {
        const double mid = 0.5 * (seq.timestamps[static_cast<size_t>(r)].first +
                                  seq.timestamps[static_cast<size_t>(r)].second);
        if (mid >= start && mid < end) {
            for (int c = 0; c < mean.cols; ++c) mean.at(0, c) += seq.features.at(r, c);
            ++count;
        }
    }
    if (count == 0)
        throw SchemaError("no feature rows inside [" + std::to_string(start) + ", " +
                          std::to_string(end) + ") of " + seq.video_id);
    for (auto& v : mean.data) v /= count;
    return mean;
}

namespace {

void add_chain_edges(TemporalGraph& g, int n, int tau_hops) {
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n && j - i <= tau_hops; ++j) {
            g.edges.emplace_back(i, j);
            g.edges.emplace_back(j, i);
        }
}

}  // namespace

TemporalGraph build_ar_graph(const FeatureSequence& seq,
                             const std::vector<ActionAnnotation>& actions, int target_idx, int w,
                             int tau_hops) {
    if (actions.empty()) throw SchemaError("build_ar_graph: empty annotation list");
    const int n = static_cast<int>(actions.size());
    if (target_idx < 0 || target_idx >= n) throw ConfigError("build_ar_graph: target out of range");
    if (w < 1 || w % 2 == 0) throw ConfigError("build_ar_graph: window must be odd and positive");

    const int half = (w - 1) / 2;
    const int lo = std::max(0, target_idx - half);
    const int hi = std::min(n, target_idx + half + 1);  // exclusive
    const int m = hi - lo;

    TemporalGraph g;
    g.node_features = Tensor(m, seq.features.cols);
    g.node_position.resize(static_cast<size_t>(m));
    g.node_role.assign(static_cast<size_t>(m), NodeRole::observed);
    g.target_mask.assign(static_cast<size_t>(m), 0);
    g.verb_labels.resize(static_cast<size_t>(m));
    g.noun_labels.resize(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const ActionAnnotation& a = actions[static_cast<size_t>(lo + i)];
        const Tensor f = span_mean_feature(seq, a.start, a.end);
        for (int c = 0; c < f.cols; ++c) g.node_features.at(i, c) = f.at(0, c);
        g.node_position[static_cast<size_t>(i)] = i;
        g.verb_labels[static_cast<size_t>(i)] = a.verb_id;
        g.noun_labels[static_cast<size_t>(i)] = a.noun_id;
    }
    g.target_mask[static_cast<size_t>(target_idx - lo)] = 1;
    add_chain_edges(g, m, tau_hops);
    g.validate();
    return g;
}

TemporalGraph build_lta_graph(const Tensor& obs_features, int z, int tau_hops) {
    const int n_in = obs_features.rows;
    if (n_in < 1 || z < 1) throw ConfigError("build_lta_graph: need N_in >= 1 and Z >= 1");
    const int m = n_in + z;

    TemporalGraph g;
    g.node_features = Tensor(m, obs_features.cols);
    g.node_position.resize(static_cast<size_t>(m));
    g.node_role.assign(static_cast<size_t>(m), NodeRole::observed);
    g.target_mask.assign(static_cast<size_t>(m), 0);
    g.verb_labels.assign(static_cast<size_t>(m), -1);
    g.noun_labels.assign(static_cast<size_t>(m), -1);

    Tensor mean(1, obs_features.cols);
    for (int r = 0; r < n_in; ++r)
        for (int c = 0; c < obs_features.cols; ++c) mean.at(0, c) += obs_features.at(r, c);
    for (auto& v : mean.data) v /= n_in;

    for (int i = 0; i < m; ++i) {
        g.node_position[static_cast<size_t>(i)] = i;
        if (i < n_in) {
            for (int c = 0; c < obs_features.cols; ++c)
                g.node_features.at(i, c) = obs_features.at(i, c);
        } else {
            for (int c = 0; c < obs_features.cols; ++c) g.node_features.at(i, c) = mean.at(0, c);
            g.node_role[static_cast<size_t>(i)] = NodeRole::future;
            g.target_mask[static_cast<size_t>(i)] = 1;
        }
    }

    std::set<std::pair<int, int>> pairs;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m && j - i <= tau_hops; ++j) pairs.insert({i, j});
    // Every future node is additionally connected to every observed node.
    for (int f = n_in; f < m; ++f)
        for (int o = 0; o < n_in; ++o) pairs.insert({o, f});
    for (auto [i, j] : pairs) {
        g.edges.emplace_back(i, j);
        g.edges.emplace_back(j, i);
    }
    g.validate();
    return g;
}

TemporalGraph build_clip_graph(const FeatureSequence& seq, const ClipAnnotation& clip, int n,
                               TaskKind kind, int tau_hops) {
    if (n < 1) throw ConfigError("build_clip_graph: need n >= 1");

    std::vector<int> rows;
    for (int r = 0; r < seq.features.rows; ++r) {
        const double mid = 0.5 * (seq.timestamps[static_cast<size_t>(r)].first +
                                  seq.timestamps[static_cast<size_t>(r)].second);
        if (mid >= clip.start && mid < clip.end) rows.push_back(r);
    }
    if (static_cast<int>(rows.size()) < n)
        throw SchemaError("clip in " + seq.video_id + " has " + std::to_string(rows.size()) +
                          " feature rows, fewer than " + std::to_string(n) + " sub-segments");

    TemporalGraph g;
    g.node_features = Tensor(n, seq.features.cols);
    g.node_position.resize(static_cast<size_t>(n));
    g.node_role.assign(static_cast<size_t>(n), NodeRole::observed);
    g.node_center_s.resize(static_cast<size_t>(n));
    const int total = static_cast<int>(rows.size());
    const double seg_len = (clip.end - clip.start) / n;
    for (int s = 0; s < n; ++s) {
        const int lo = s * total / n;
        const int hi = (s + 1) * total / n;
        for (int r = lo; r < hi; ++r)
            for (int c = 0; c < g.node_features.cols; ++c)
                g.node_features.at(s, c) += seq.features.at(rows[static_cast<size_t>(r)], c);
        for (int c = 0; c < g.node_features.cols; ++c) g.node_features.at(s, c) /= (hi - lo);
        g.node_position[static_cast<size_t>(s)] = s;
        g.node_center_s[static_cast<size_t>(s)] = clip.start + (s + 0.5) * seg_len;
    }
    add_chain_edges(g, n, tau_hops);

    if (kind == TaskKind::graph_classification) {
        g.graph_label = clip.oscc_label;
        g.target_mask.assign(static_cast<size_t>(n), 0);
    } else if (kind == TaskKind::node_localization) {
        if (!clip.pnr_time) throw SchemaError("PNR clip without pnr_time in " + seq.video_id);
        g.node_labels.assign(static_cast<size_t>(n), 0);
        // Boundary ties go to the earlier sub-segment.
        int s = static_cast<int>(std::ceil((*clip.pnr_time - clip.start) / seg_len)) - 1;
        s = std::clamp(s, 0, n - 1);
        g.node_labels[static_cast<size_t>(s)] = 1;
        g.target_mask.assign(static_cast<size_t>(n), 1);
        g.keyframe_s = *clip.pnr_time;
    } else {
        throw ConfigError("build_clip_graph: kind must be OSCC or PNR");
    }
    g.validate();
    return g;
}

std::vector<double> positional_encoding(int position, int dim) {
    if (position < 0) throw ConfigError("positional_encoding: position must be >= 0");
    if (dim <= 0 || dim % 2 != 0)
        throw ConfigError("positional_encoding: dimension must be positive and even");
    std::vector<double> pe(static_cast<size_t>(dim));
    for (int m = 0; m < dim / 2; ++m) {
        const double freq = std::pow(10000.0, -2.0 * m / dim);
        pe[static_cast<size_t>(2 * m)] = std::sin(position * freq);
        pe[static_cast<size_t>(2 * m + 1)] = std::cos(position * freq);
    }
    return pe;
}

Tensor features_with_positions(const TemporalGraph& g) {
    Tensor out = g.node_features;
    for (int r = 0; r < out.rows; ++r) {
        const auto pe = positional_encoding(g.node_position[static_cast<size_t>(r)], out.cols);
        for (int c = 0; c < out.cols; ++c) out.at(r, c) += pe[static_cast<size_t>(c)];
    }
    return out;
}

Tensor neighbor_mean_matrix(const TemporalGraph& g) {
    const int m = g.num_nodes();
    Tensor a(m, m);
    std::vector<int> degree(static_cast<size_t>(m), 0);
    for (auto [i, j] : g.edges) {
        a.at(i, j) += 1.0;
        degree[static_cast<size_t>(i)] += 1;
    }
    for (int i = 0; i < m; ++i) {
        if (degree[static_cast<size_t>(i)] == 0) continue;
        for (int j = 0; j < m; ++j) a.at(i, j) /= degree[static_cast<size_t>(i)];
    }
    return a;
}

std::string graph_to_json(const TemporalGraph& g) {
    nlohmann::json j;
    j["num_nodes"] = g.num_nodes();
    j["positions"] = g.node_position;
    j["edges"] = nlohmann::json::array();
    for (auto [a, b] : g.edges) j["edges"].push_back({a, b});
    j["roles"] = nlohmann::json::array();
    for (auto r : g.node_role) j["roles"].push_back(r == NodeRole::future ? "future" : "observed");
    j["target_mask"] = nlohmann::json::array();
    for (char t : g.target_mask) j["target_mask"].push_back(t != 0);
    if (g.graph_label) j["graph_label"] = *g.graph_label;
    if (!g.node_labels.empty()) j["node_labels"] = g.node_labels;
    if (!g.verb_labels.empty()) j["verb_labels"] = g.verb_labels;
    if (!g.noun_labels.empty()) j["noun_labels"] = g.noun_labels;
    if (!g.node_center_s.empty()) j["node_center_s"] = g.node_center_s;
    j["features"] = nlohmann::json::array();
    for (int r = 0; r < g.node_features.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < g.node_features.cols; ++c) row.push_back(g.node_features.at(r, c));
        j["features"].push_back(std::move(row));
    }
    return j.dump(2);
}

}  // namespace egopack
