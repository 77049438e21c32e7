#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "egopack/model.hpp"

namespace egopack {

struct TrainConfig {
    std::map<std::string, int> epochs_per_task = {{"ar", 30}, {"lta", 40}, {"oscc", 10}, {"pnr", 10}};
    int mtl_epochs = 10;
    double lr = 1e-4;
    int warmup_epochs = 5;
    int batch_size = 16;
    uint64_t seed = 7;
    int threads = 0;  // 0 = hardware concurrency (capped)
    bool freeze_backbone = false;

    int epochs_for(const std::string& task) const;
    void validate() const;
};

struct EpochMetrics {
    int epoch = 0;
    std::map<std::string, double> task_loss;
    double total_loss = 0.0;
};

using EpochSink = std::function<void(const EpochMetrics&)>;

struct ModelState {
    Model model;
    nn::AdamState opt;
    int epoch = 0;
    uint64_t seed = 0;
};

// Cyclic shuffled index stream; reshuffles with a fresh per-cycle seed on
// wrap-around. advance() fast-forwards for exact resume.
class BatchIterator {
   public:
    BatchIterator(int n, uint64_t seed, const std::string& tag);
    std::vector<int> next(int batch);
    void advance(long consumed);

   private:
    void reshuffle();
    int n_;
    uint64_t seed_;
    std::string tag_;
    long cycle_ = -1;
    int pos_ = 0;
    std::vector<int> order_;
};

// Multi-task pretraining with hard parameter sharing: each step draws one
// batch per task and the total loss is the mean of the per-task losses.
// A single-element task list is single-task training. strip_edges trains
// the MLP baseline (no message passing).
ModelState train_mtl(const std::vector<TaskSpec>& tasks, const Dataset& ds,
                     const BackboneConfig& bcfg, int head_dim, const TrainConfig& tc,
                     const EpochSink& sink = nullptr, const ModelState* resume = nullptr,
                     bool strip_edges = false);

// Novel-task stage: frozen banks, trainable backbone (unless the novel task
// is LTA or freeze_backbone is set), backpack head MLPs, interaction weights,
// vote classifiers and the fresh novel head, all under the novel loss only.
ModelState train_novel(const ModelState& mtl_state, const BankMap& banks, const TaskSpec& novel,
                       const Dataset& ds, const TrainConfig& tc, const InteractionConfig& icfg,
                       const EpochSink& sink = nullptr);

// MTL checkpoint + fresh head, finetuned on the novel task with no
// prototype access anywhere in the path.
ModelState train_mtl_ft(const ModelState& mtl_state, const TaskSpec& novel, const Dataset& ds,
                        const TrainConfig& tc, const EpochSink& sink = nullptr);

// --- evaluation -----------------------------------------------------------

struct PredRecord {
    std::vector<int> gt_verb, gt_noun, pred_verb, pred_noun;  // node tasks
    int gt_label = -1, pred_label = -1;                        // oscc
    double gt_time = 0.0, pred_time = 0.0, loc_err = 0.0;      // pnr
    // Per contributor ("novel", "fused", backpack task): argmax per output
    // at the first target row; used for agreement ratios.
    std::map<std::string, std::vector<int>> contributor_pred;
};

struct EvalOutput {
    std::map<std::string, double> metrics;
    std::vector<PredRecord> records;
    NeighborLog neighbors;
};

// Plain head evaluation, or the full backpack pipeline when the model has a
// novel stage for this task and banks are supplied.
EvalOutput evaluate(const Model& model, const BankMap* banks, const TaskSpec& spec,
                    const SampleSet& samples, int threads = 0);

// --- checkpoints -----------------------------------------------------------

void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace egopack
