#pragma once

#include <map>
#include <string>
#include <vector>

#include "egopack/interaction.hpp"

namespace egopack {

double top1_accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Levenshtein distance between the label sequences, normalized by the
// ground-truth length.
double edit_distance(const std::vector<int>& pred, const std::vector<int>& gt);

// |center(argmax node) - gt_time| in seconds; argmax ties resolve to the
// earlier node.
double pnr_loc_error(const std::vector<double>& node_logits, const std::vector<double>& centers,
                     double gt_time);

// Mean of [AR verb acc, AR noun acc, OSCC acc, 1-ED_verb, 1-ED_noun,
// 1-min(locErr, 1.0)].
struct AggregateInputs {
    double ar_verb_top1 = 0.0;
    double ar_noun_top1 = 0.0;
    double oscc_acc = 0.0;
    double lta_verb_ed = 1.0;
    double lta_noun_ed = 1.0;
    double pnr_loc_err_s = 1.0;
};
double aggregate_score(const AggregateInputs& m);

// Pairwise fraction of samples on which two prediction streams agree.
// names_out receives the sorted stream names (matrix row/col order).
std::vector<std::vector<double>> agreement_matrix(
    const std::map<std::string, std::vector<int>>& task_preds, std::vector<std::string>& names_out);

// Confusion over the top_n most frequent ground-truth classes plus a final
// "rest" pseudo-class. counts[i][j] = gt class i predicted as class j.
struct ConfusionMatrix {
    std::vector<int> class_ids;               // size <= top_n; "rest" is implicit last
    std::vector<std::vector<long>> counts;    // (n+1) x (n+1)
};
ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int top_n = 20);

// Selected-prototype counts grouped by the verb of the prototype row,
// per backpack task.
std::map<std::string, std::vector<long>> prototype_match_histogram(const NeighborLog& log,
                                                                   const BankMap& banks,
                                                                   int n_verbs);

}  // namespace egopack
