#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egopack/backbone.hpp"
#include "egopack/data.hpp"
#include "egopack/graph.hpp"
#include "egopack/heads.hpp"
#include "egopack/interaction.hpp"
#include "egopack/nn.hpp"
#include "egopack/prototypes.hpp"

namespace egopack {

// One materialized task sample: the graph plus what the forward pass needs
// precomputed (positional encodings and the neighbor-mean operator).
struct TaskSample {
    TemporalGraph graph;
    Tensor pe_features;
    Tensor nbr_mean;
};

struct SampleSet {
    TaskSpec spec;
    std::vector<TaskSample> samples;
};

TaskSample make_sample(TemporalGraph graph);

// Materializes every sample of a task over the given split (0 train, 1 val).
// strip_edges removes all graph connectivity (the MLP baseline).
SampleSet build_samples(const Dataset& ds, const TaskSpec& spec, int split,
                        bool strip_edges = false);

// Shared temporal backbone plus one head per task; the novel stage adds a
// fresh head and per-backpack-task interaction weights.
struct Model {
    BackboneConfig cfg;
    int head_dim = 64;
    std::vector<TaskSpec> tasks;
    nn::ParamSet params;
    BackboneLayout backbone;
    std::map<std::string, HeadLayout> heads;

    bool has_novel = false;
    TaskSpec novel_task;
    HeadLayout novel_head;
    InteractionConfig icfg;
    std::map<std::string, InteractionTaskLayout> interaction;

    uint64_t init_seed = 0;

    const TaskSpec& task_spec(const std::string& name) const;
    bool has_task(const std::string& name) const;
    std::vector<int> backbone_param_indices() const;
};

Model make_model(const BackboneConfig& cfg, int head_dim, const std::vector<TaskSpec>& tasks,
                 uint64_t seed);

// The novel task must not appear in the backpack. Head MLPs of the backpack
// tasks are reused from the MTL training; the novel head and the interaction
// weights are freshly initialised.
void add_novel_stage(Model& model, const TaskSpec& novel, const InteractionConfig& icfg);

struct TaskForward {
    nn::ValId loss = -1;
    std::vector<Tensor> logits;   // per output head, one row per target (or one row, graph tasks)
    std::vector<int> target_rows;
};

// Plain forward (MTL / single-task / MTL+FT): backbone, one head, task loss.
// Pass `head_override` to run a head other than the task's own (the novel
// head in MTL+FT).
TaskForward task_forward(nn::Tape& t, const Model& model, const TaskSpec& spec,
                         const TaskSample& sample, const HeadLayout* head_override = nullptr);

struct NovelForward {
    nn::ValId loss = -1;
    std::vector<Tensor> fused_logits;
    std::vector<Tensor> novel_logits;
    std::map<std::string, std::vector<Tensor>> votes;  // per backpack task, per output
    std::vector<int> target_rows;
};

// Novel-task forward with the backpack: queries every task head, refines the
// features against the frozen banks, and fuses the votes with the novel
// head's logits before the loss. k = 0 skips the interaction stage.
NovelForward novel_forward(nn::Tape& t, const Model& model, const BankMap& banks,
                           const TaskSample& sample, NeighborLog* log = nullptr);

// Per-sample, per-task head features of the AR target node (prototype
// queries and bank rows). Parallel over samples, reduced in order.
std::map<std::string, std::vector<Tensor>> prototype_features(const Model& model,
                                                              const SampleSet& ar_samples,
                                                              int threads);

// Labels for loss/metrics, resolved per task kind.
std::vector<std::vector<int>> per_node_labels(const TaskSpec& spec, const TemporalGraph& g);

int resolve_threads(int requested);

}  // namespace egopack
