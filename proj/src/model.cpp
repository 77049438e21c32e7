#include "egopack/model.hpp"

#include <algorithm>
#include <thread>

namespace egopack {

TaskSample make_sample(TemporalGraph graph) {
    TaskSample s;
    s.pe_features = features_with_positions(graph);
    s.nbr_mean = neighbor_mean_matrix(graph);
    s.graph = std::move(graph);
    return s;
}

namespace {

// Actions of one video, sorted by start time.
std::map<std::string, std::vector<ActionAnnotation>> actions_by_video(const Dataset& ds) {
    std::map<std::string, std::vector<ActionAnnotation>> by_video;
    for (const auto& a : ds.actions) by_video[a.video_id].push_back(a);
    for (auto& [id, v] : by_video)
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    return by_video;
}

}  // namespace

SampleSet build_samples(const Dataset& ds, const TaskSpec& spec, int split, bool strip_edges) {
    SampleSet set;
    set.spec = spec;
    const std::vector<int> splits = video_splits(ds);
    auto in_split = [&](const std::string& video_id) {
        return splits[static_cast<size_t>(ds.video_index.at(video_id))] == split;
    };

    if (spec.kind == TaskKind::node_classification) {
        for (const auto& [video_id, actions] : actions_by_video(ds)) {
            if (!in_split(video_id)) continue;
            const FeatureSequence& seq = ds.video(video_id);
            for (int i = 0; i < static_cast<int>(actions.size()); ++i) {
                TemporalGraph g =
                    build_ar_graph(seq, actions, i, spec.graph.window, spec.graph.tau_hops);
                if (strip_edges) g.edges.clear();
                set.samples.push_back(make_sample(std::move(g)));
            }
        }
    } else if (spec.kind == TaskKind::future_node_classification) {
        const int n_in = spec.graph.observed;
        const int z = spec.graph.anticipate;
        for (const auto& [video_id, actions] : actions_by_video(ds)) {
            if (!in_split(video_id)) continue;
            const FeatureSequence& seq = ds.video(video_id);
            const int n = static_cast<int>(actions.size());
            for (int i = 0; i + n_in + z <= n; ++i) {
                Tensor obs(n_in, seq.features.cols);
                for (int o = 0; o < n_in; ++o) {
                    const auto& a = actions[static_cast<size_t>(i + o)];
                    const Tensor f = span_mean_feature(seq, a.start, a.end);
                    for (int c = 0; c < f.cols; ++c) obs.at(o, c) = f.at(0, c);
                }
                TemporalGraph g = build_lta_graph(obs, z, spec.graph.tau_hops);
                for (int f = 0; f < z; ++f) {
                    const auto& a = actions[static_cast<size_t>(i + n_in + f)];
                    g.verb_labels[static_cast<size_t>(n_in + f)] = a.verb_id;
                    g.noun_labels[static_cast<size_t>(n_in + f)] = a.noun_id;
                }
                if (strip_edges) g.edges.clear();
                set.samples.push_back(make_sample(std::move(g)));
            }
        }
    } else {
        const TaskView view = task_view(ds, spec.name);
        for (const auto& clip : view.clips) {
            if (!in_split(clip.video_id)) continue;
            TemporalGraph g = build_clip_graph(ds.video(clip.video_id), clip,
                                               spec.graph.subsegments, spec.kind, spec.graph.tau_hops);
            if (strip_edges) g.edges.clear();
            set.samples.push_back(make_sample(std::move(g)));
        }
    }
    return set;
}

const TaskSpec& Model::task_spec(const std::string& name) const {
    for (const auto& t : tasks)
        if (t.name == name) return t;
    throw ConfigError("model has no head for task: " + name);
}

bool Model::has_task(const std::string& name) const {
    for (const auto& t : tasks)
        if (t.name == name) return true;
    return false;
}

std::vector<int> Model::backbone_param_indices() const {
    std::vector<int> idx;
    if (backbone.in_proj_w >= 0) {
        idx.push_back(backbone.in_proj_w);
        idx.push_back(backbone.in_proj_b);
    }
    for (const auto& l : backbone.layers)
        for (int i : {l.w_r, l.w, l.w_p, l.b, l.b_p, l.ln_gain, l.ln_bias}) idx.push_back(i);
    return idx;
}

Model make_model(const BackboneConfig& cfg, int head_dim, const std::vector<TaskSpec>& tasks,
                 uint64_t seed) {
    Model m;
    m.cfg = cfg;
    m.head_dim = head_dim;
    m.tasks = tasks;
    m.init_seed = seed;
    m.backbone = init_backbone(m.params, cfg, seed);
    for (const auto& t : tasks)
        m.heads.emplace(t.name, init_head(m.params, "heads/" + t.name, cfg.hidden_dim, head_dim,
                                          t.output_dims, seed));
    return m;
}

void add_novel_stage(Model& model, const TaskSpec& novel, const InteractionConfig& icfg) {
    icfg.validate();
    for (const auto& t : icfg.backpack) {
        if (t == novel.name)
            throw ConfigError("novel task '" + novel.name + "' must not be in the backpack");
        if (!model.has_task(t))
            throw ConfigError("backpack task '" + t + "' has no head in the model");
    }
    model.has_novel = true;
    model.novel_task = novel;
    model.icfg = icfg;
    model.novel_head = init_head(model.params, "novel/" + novel.name, model.cfg.hidden_dim,
                                 model.head_dim, novel.output_dims, model.init_seed);
    if (icfg.k > 0) {
        for (const auto& t : icfg.backpack)
            model.interaction.emplace(
                t, init_interaction_task(model.params, t, model.head_dim, novel.output_dims,
                                         icfg.depth, model.init_seed));
    }
}

std::vector<std::vector<int>> per_node_labels(const TaskSpec& spec, const TemporalGraph& g) {
    if (spec.kind == TaskKind::node_classification ||
        spec.kind == TaskKind::future_node_classification)
        return {g.verb_labels, g.noun_labels};
    if (spec.kind == TaskKind::graph_classification) return {{g.graph_label.value()}};
    return {g.node_labels};
}

namespace {

// Rows the head operates on: every node for node-level tasks, the pooled
// vector (single row) for graph-level tasks.
nn::ValId head_input(nn::Tape& t, const TaskSpec& spec, nn::ValId backbone_out, int num_nodes) {
    if (spec.kind == TaskKind::graph_classification) {
        std::vector<int> all(static_cast<size_t>(num_nodes));
        for (int i = 0; i < num_nodes; ++i) all[static_cast<size_t>(i)] = i;
        return graph_max_pool(t, backbone_out, all);
    }
    return backbone_out;
}

}  // namespace

TaskForward task_forward(nn::Tape& t, const Model& model, const TaskSpec& spec,
                         const TaskSample& sample, const HeadLayout* head_override) {
    const HeadLayout& head = head_override != nullptr ? *head_override : model.heads.at(spec.name);
    const nn::ValId x = t.leaf(sample.pe_features);
    const nn::ValId h = backbone_forward(t, x, sample.nbr_mean, model.cfg, model.backbone);
    const nn::ValId hin = head_input(t, spec, h, sample.graph.num_nodes());
    const nn::ValId feats = head_features(t, hin, head, model.cfg.leaky_slope);

    TaskForward out;
    std::vector<nn::ValId> logits;
    for (size_t o = 0; o < head.outs.size(); ++o) logits.push_back(head_logits(t, feats, head, static_cast<int>(o)));

    const auto labels = per_node_labels(spec, sample.graph);
    switch (spec.kind) {
        case TaskKind::node_classification:
        case TaskKind::future_node_classification:
            out.loss = masked_classification_loss(t, logits, labels, sample.graph.target_mask);
            out.target_rows = sample.graph.target_indices();
            for (nn::ValId l : logits) {
                Tensor sel(static_cast<int>(out.target_rows.size()), t.value(l).cols);
                for (size_t r = 0; r < out.target_rows.size(); ++r)
                    for (int c = 0; c < sel.cols; ++c)
                        sel.at(static_cast<int>(r), c) = t.value(l).at(out.target_rows[r], c);
                out.logits.push_back(std::move(sel));
            }
            break;
        case TaskKind::graph_classification:
            out.loss = classification_loss(t, logits, labels);
            out.target_rows = {0};
            for (nn::ValId l : logits) out.logits.push_back(t.value(l));
            break;
        case TaskKind::node_localization:
            out.loss = pnr_loss(t, logits[0], sample.graph.node_labels);
            out.target_rows = sample.graph.target_indices();
            out.logits.push_back(t.value(logits[0]));
            break;
    }
    return out;
}

NovelForward novel_forward(nn::Tape& t, const Model& model, const BankMap& banks,
                           const TaskSample& sample, NeighborLog* log) {
    if (!model.has_novel) throw ConfigError("novel_forward: model has no novel stage");
    const TaskSpec& spec = model.novel_task;

    const nn::ValId x = t.leaf(sample.pe_features);
    const nn::ValId h = backbone_forward(t, x, sample.nbr_mean, model.cfg, model.backbone);
    const nn::ValId hin = head_input(t, spec, h, sample.graph.num_nodes());

    // Node-level novel tasks query with the target rows only.
    std::vector<int> rows;
    if (spec.kind == TaskKind::graph_classification) {
        rows = {0};
    } else if (spec.kind == TaskKind::node_localization) {
        rows.resize(static_cast<size_t>(sample.graph.num_nodes()));
        for (int i = 0; i < sample.graph.num_nodes(); ++i) rows[static_cast<size_t>(i)] = i;
    } else {
        rows = sample.graph.target_indices();
    }
    const nn::ValId query_in =
        spec.kind == TaskKind::graph_classification ? hin : t.select_rows(hin, rows);

    const nn::ValId novel_feats = head_features(t, query_in, model.novel_head, model.cfg.leaky_slope);
    std::vector<nn::ValId> fused;
    for (size_t o = 0; o < model.novel_head.outs.size(); ++o)
        fused.push_back(head_logits(t, novel_feats, model.novel_head, static_cast<int>(o)));

    NovelForward out;
    for (nn::ValId l : fused) out.novel_logits.push_back(t.value(l));

    if (model.icfg.k > 0) {
        for (const auto& task : model.icfg.backpack) {
            const PrototypeBank& bank = banks.at(task);
            const InteractionTaskLayout& layout = model.interaction.at(task);
            const nn::ValId q =
                head_features(t, query_in, model.heads.at(task), model.cfg.leaky_slope);
            const nn::ValId refined =
                refine_features(t, q, bank, layout, model.icfg.depth, model.icfg.k, log);
            std::vector<Tensor> task_votes;
            for (size_t o = 0; o < layout.votes.size(); ++o) {
                const auto& vote = layout.votes[o];
                const nn::ValId vl =
                    t.add_row(t.matmul(refined, t.param(vote.w)), t.param(vote.b));
                task_votes.push_back(t.value(vl));
                fused[o] = fuse_predictions(t, {vl}, fused[o]);
            }
            out.votes.emplace(task, std::move(task_votes));
        }
    }

    for (nn::ValId l : fused) out.fused_logits.push_back(t.value(l));
    out.target_rows = rows;

    // Loss on the fused logits, under the novel task's own loss form. The
    // logits are already restricted to the target rows.
    const auto labels = per_node_labels(spec, sample.graph);
    switch (spec.kind) {
        case TaskKind::node_classification:
        case TaskKind::future_node_classification: {
            std::vector<std::vector<int>> target_labels;
            for (const auto& all : labels) {
                std::vector<int> l;
                for (int r : rows) l.push_back(all[static_cast<size_t>(r)]);
                target_labels.push_back(std::move(l));
            }
            out.loss = classification_loss(t, fused, target_labels);
            break;
        }
        case TaskKind::graph_classification:
            out.loss = classification_loss(t, fused, labels);
            break;
        case TaskKind::node_localization:
            out.loss = pnr_loss(t, fused[0], sample.graph.node_labels);
            break;
    }
    return out;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 16u));
}

std::map<std::string, std::vector<Tensor>> prototype_features(const Model& model,
                                                              const SampleSet& ar_samples,
                                                              int threads) {
    const int n = static_cast<int>(ar_samples.samples.size());
    std::map<std::string, std::vector<Tensor>> out;
    for (const auto& spec : model.tasks) out[spec.name].resize(static_cast<size_t>(n));

    const int workers = std::min(resolve_threads(threads), std::max(n, 1));
    auto work = [&](int w) {
        for (int s = w; s < n; s += workers) {
            const TaskSample& sample = ar_samples.samples[static_cast<size_t>(s)];
            nn::Tape t(&model.params);
            const nn::ValId x = t.leaf(sample.pe_features);
            const nn::ValId h = backbone_forward(t, x, sample.nbr_mean, model.cfg, model.backbone);
            const int target = sample.graph.target_indices().at(0);
            const nn::ValId target_feat = t.select_rows(h, {target});
            for (const auto& spec : model.tasks) {
                const nn::ValId f =
                    head_features(t, target_feat, model.heads.at(spec.name), model.cfg.leaky_slope);
                out[spec.name][static_cast<size_t>(s)] = t.value(f);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
    return out;
}

}  // namespace egopack
