#include "egopack/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "egopack/common.hpp"

namespace egopack {

double top1_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw ShapeError("top1_accuracy: prediction/label size mismatch");
    size_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double edit_distance(const std::vector<int>& pred, const std::vector<int>& gt) {
    if (gt.empty()) throw ShapeError("edit_distance: empty ground truth");
    const size_t n = pred.size(), m = gt.size();
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            const size_t sub = prev[j - 1] + (pred[i - 1] == gt[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(m);
}

double pnr_loc_error(const std::vector<double>& node_logits, const std::vector<double>& centers,
                     double gt_time) {
    if (node_logits.empty() || node_logits.size() != centers.size())
        throw ShapeError("pnr_loc_error: logits/centers size mismatch");
    size_t best = 0;
    for (size_t i = 1; i < node_logits.size(); ++i)
        if (node_logits[i] > node_logits[best]) best = i;
    return std::abs(centers[best] - gt_time);
}

double aggregate_score(const AggregateInputs& m) {
    const double parts[6] = {m.ar_verb_top1,
                             m.ar_noun_top1,
                             m.oscc_acc,
                             1.0 - m.lta_verb_ed,
                             1.0 - m.lta_noun_ed,
                             1.0 - std::min(m.pnr_loc_err_s, 1.0)};
    double sum = 0.0;
    for (double p : parts) sum += p;
    return sum / 6.0;
}

std::vector<std::vector<double>> agreement_matrix(
    const std::map<std::string, std::vector<int>>& task_preds, std::vector<std::string>& names_out) {
    names_out.clear();
    for (const auto& [name, preds] : task_preds) {
        if (preds.size() != task_preds.begin()->second.size())
            throw ShapeError("agreement_matrix: streams must have equal length");
        names_out.push_back(name);
    }
    const size_t k = names_out.size();
    std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
    for (size_t a = 0; a < k; ++a) {
        const auto& pa = task_preds.at(names_out[a]);
        for (size_t b = 0; b < k; ++b) {
            const auto& pb = task_preds.at(names_out[b]);
            size_t agree = 0;
            for (size_t i = 0; i < pa.size(); ++i)
                if (pa[i] == pb[i]) ++agree;
            m[a][b] = pa.empty() ? 0.0 : static_cast<double>(agree) / pa.size();
        }
    }
    return m;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int top_n) {
    if (preds.size() != labels.size()) throw ShapeError("confusion_matrix: size mismatch");
    std::map<int, long> freq;
    for (int l : labels) freq[l] += 1;
    std::vector<std::pair<long, int>> ranked;
    for (auto [cls, count] : freq) ranked.emplace_back(count, cls);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    ConfusionMatrix cm;
    for (size_t i = 0; i < ranked.size() && static_cast<int>(i) < top_n; ++i)
        cm.class_ids.push_back(ranked[i].second);
    std::map<int, int> index;
    for (size_t i = 0; i < cm.class_ids.size(); ++i) index[cm.class_ids[i]] = static_cast<int>(i);
    const int rest = static_cast<int>(cm.class_ids.size());
    cm.counts.assign(static_cast<size_t>(rest + 1), std::vector<long>(static_cast<size_t>(rest + 1), 0));
    auto idx_of = [&](int cls) {
        auto it = index.find(cls);
        return it == index.end() ? rest : it->second;
    };
    for (size_t i = 0; i < preds.size(); ++i)
        cm.counts[static_cast<size_t>(idx_of(labels[i]))][static_cast<size_t>(idx_of(preds[i]))] += 1;
    return cm;
}

std::map<std::string, std::vector<long>> prototype_match_histogram(const NeighborLog& log,
                                                                   const BankMap& banks,
                                                                   int n_verbs) {
    std::map<std::string, std::vector<long>> hist;
    for (const auto& entry : log.entries) {
        auto& counts = hist[entry.task];
        if (counts.empty()) counts.assign(static_cast<size_t>(n_verbs), 0);
        const PrototypeBank& bank = banks.at(entry.task);
        for (int row : entry.rows) {
            const int verb = bank.keys[static_cast<size_t>(row)].first;
            if (verb >= 0 && verb < n_verbs) counts[static_cast<size_t>(verb)] += 1;
        }
    }
    return hist;
}

}  // namespace egopack
