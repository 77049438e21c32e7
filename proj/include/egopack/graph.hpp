#pragma once

#include <optional>
#include <string>
#include <vector>

#include "egopack/data.hpp"
#include "egopack/tensor.hpp"

namespace egopack {

enum class NodeRole { observed, future };

enum class TaskKind { node_classification, future_node_classification, graph_classification, node_localization };

struct GraphParams {
    int window = 9;         // AR: actions per window (odd)
    int observed = 2;       // LTA: input clips
    int anticipate = 20;    // LTA: future nodes
    int subsegments = 4;    // OSCC/PNR: nodes per clip
    int tau_hops = 1;       // chain connectivity radius
};

struct TaskSpec {
    std::string name;                // ar | lta | oscc | pnr
    TaskKind kind = TaskKind::node_classification;
    int head_dim = 64;               // D_k
    std::vector<int> output_dims;    // ar/lta: {verbs, nouns}; oscc: {2}; pnr: {1}
    GraphParams graph;

    bool is_graph_level() const { return kind == TaskKind::graph_classification; }
};

TaskSpec make_task_spec(const std::string& name, const Vocab& vocab, const GraphParams& gp,
                        int head_dim);

// One task sample. Edges are stored as directed entries with the symmetric
// closure always present; node positions index the node within its window.
struct TemporalGraph {
    Tensor node_features;                    // M x D
    std::vector<int> node_position;
    std::vector<std::pair<int, int>> edges;  // directed entries, symmetric
    std::vector<NodeRole> node_role;
    std::vector<char> target_mask;
    std::optional<int> graph_label;          // oscc
    std::vector<int> node_labels;            // pnr one-hot keyframe
    std::vector<int> verb_labels;            // -1 where not applicable
    std::vector<int> noun_labels;
    std::vector<double> node_center_s;       // clip graphs: sub-segment centers
    std::optional<double> keyframe_s;        // pnr ground-truth time

    int num_nodes() const { return node_features.rows; }
    int undirected_edge_count() const { return static_cast<int>(edges.size()) / 2; }
    std::vector<int> target_indices() const;
    void validate() const;
};

// Mean of the feature rows whose midpoint falls inside [start, end).
Tensor span_mean_feature(const FeatureSequence& seq, double start, double end);

// Window of up to `w` actions centred on the target, clamped at video
// boundaries; chain edges over temporally adjacent actions.
TemporalGraph build_ar_graph(const FeatureSequence& seq,
                             const std::vector<ActionAnnotation>& actions, int target_idx, int w,
                             int tau_hops = 1);

// N observed nodes plus Z future nodes initialised with the observed mean;
// chain edges over the whole sequence and every future node connected to
// every observed node. Future labels may be attached afterwards.
TemporalGraph build_lta_graph(const Tensor& obs_features, int z, int tau_hops = 1);

// Clip split into n uniform sub-segments, one node each (mean of its rows).
// kind selects the supervision: graph label for OSCC, one-hot keyframe node
// labels for PNR.
TemporalGraph build_clip_graph(const FeatureSequence& seq, const ClipAnnotation& clip, int n,
                               TaskKind kind, int tau_hops = 1);

// Sinusoidal positional encoding; dim 2m = sin(pos / 10000^(2m/D)),
// dim 2m+1 = cos of the same argument. D must be even.
std::vector<double> positional_encoding(int position, int dim);

// node_features + per-node positional encoding, ready for the backbone.
Tensor features_with_positions(const TemporalGraph& g);

// Row-normalized neighbor-mean operator (M x M); rows with no neighbors
// are all zero.
Tensor neighbor_mean_matrix(const TemporalGraph& g);

std::string graph_to_json(const TemporalGraph& g);

}  // namespace egopack
