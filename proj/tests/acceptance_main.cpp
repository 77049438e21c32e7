// Acceptance suite: one criterion per check, one PASS/FAIL line each.
// Runs on synthetic data only; the heavyweight transfer experiment uses the
// default synthetic configuration.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>

#include "egopack/metrics.hpp"
#include "egopack/prototypes.hpp"
#include "egopack/rng.hpp"
#include "egopack/training.hpp"

using namespace egopack;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<TaskSpec> specs_for(const Dataset& ds, const GraphParams& gp, int head_dim,
                                std::initializer_list<const char*> names) {
    std::vector<TaskSpec> out;
    for (const char* n : names) out.push_back(make_task_spec(n, ds.vocab, gp, head_dim));
    return out;
}

TemporalGraph chain_graph(int n, int dim, uint64_t seed) {
    TemporalGraph g;
    Rng rng(seed);
    g.node_features = Tensor(n, dim);
    for (auto& v : g.node_features.data) v = rng.normal();
    g.node_position.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) g.node_position[static_cast<size_t>(i)] = i;
    g.node_role.assign(static_cast<size_t>(n), NodeRole::observed);
    g.target_mask.assign(static_cast<size_t>(n), 0);
    for (int i = 0; i + 1 < n; ++i) {
        g.edges.emplace_back(i, i + 1);
        g.edges.emplace_back(i + 1, i);
    }
    return g;
}

// ---- criterion 1: gradient correctness -------------------------------------

void criterion_gradients() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_name = "none";
    auto track = [&](const std::string& name, double err) {
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };

    BackboneConfig cfg;
    cfg.layers = 2;
    cfg.input_dim = 6;
    cfg.hidden_dim = 6;

    {  // single sage layer
        nn::ParamSet params;
        const BackboneLayout layout = init_backbone(params, cfg, 101);
        const TemporalGraph g = chain_graph(4, 6, 102);
        const Tensor adj = neighbor_mean_matrix(g);
        nn::ParamSet one;
        const SageLayerLayout sl = init_backbone(one, cfg, 103).layers[0];
        track("sage_layer", nn::grad_check(one, [&](nn::Tape& t) {
                  const nn::ValId h =
                      sage_layer(t, t.leaf(g.node_features), t.leaf(adj), sl, 0.01);
                  return t.softmax_cross_entropy(h, {0, 1, 2, 3});
              }));
        (void)layout;
    }

    {  // full backbone with input projection
        BackboneConfig proj = cfg;
        proj.input_dim = 8;
        nn::ParamSet params;
        const BackboneLayout layout = init_backbone(params, proj, 104);
        const TemporalGraph g = chain_graph(4, 8, 105);
        const Tensor x = features_with_positions(g);
        const Tensor adj = neighbor_mean_matrix(g);
        track("backbone", nn::grad_check(params, [&](nn::Tape& t) {
                  const nn::ValId h = backbone_forward(t, t.leaf(x), adj, proj, layout);
                  return t.softmax_cross_entropy(h, {0, 1, 0, 1});
              }));
    }

    {  // every head kind
        Rng rng(106);
        Tensor x(5, 6);
        for (auto& v : x.data) v = rng.normal();
        // ar/lta style: verb + noun classifiers over masked targets
        nn::ParamSet p1;
        const HeadLayout ar = init_head(p1, "heads/ar", 6, 6, {3, 4}, 107);
        track("head_ar", nn::grad_check(p1, [&](nn::Tape& t) {
                  const nn::ValId f = head_features(t, t.leaf(x), ar, 0.01);
                  return masked_classification_loss(
                      t, {head_logits(t, f, ar, 0), head_logits(t, f, ar, 1)},
                      {{0, 1, 2, 0, 1}, {3, 2, 1, 0, 3}}, {0, 1, 0, 1, 0});
              }));
        nn::ParamSet p2;
        const HeadLayout oscc = init_head(p2, "heads/oscc", 6, 6, {2}, 108);
        track("head_oscc", nn::grad_check(p2, [&](nn::Tape& t) {
                  const nn::ValId pooled = graph_max_pool(t, t.leaf(x), {0, 1, 2, 3, 4});
                  const nn::ValId f = head_features(t, pooled, oscc, 0.01);
                  return t.softmax_cross_entropy(head_logits(t, f, oscc, 0), {1});
              }));
        nn::ParamSet p3;
        const HeadLayout pnr = init_head(p3, "heads/pnr", 6, 6, {1}, 109);
        track("head_pnr", nn::grad_check(p3, [&](nn::Tape& t) {
                  const nn::ValId f = head_features(t, t.leaf(x), pnr, 0.01);
                  return pnr_loss(t, head_logits(t, f, pnr, 0), {0, 0, 1, 0, 0});
              }));
    }

    {  // interaction layer
        Rng rng(110);
        PrototypeBank bank;
        bank.task = "ar";
        bank.dim = 6;
        for (int r = 0; r < 10; ++r) {
            bank.keys.emplace_back(r, 0);
            bank.counts.push_back(1);
            for (int c = 0; c < 6; ++c) bank.values.push_back(static_cast<float>(rng.normal()));
        }
        nn::ParamSet params;
        const InteractionTaskLayout layout =
            init_interaction_task(params, "ar", 6, {2}, 2, 111);
        const int qi = params.add("query", nn::glorot_uniform(1, 6, 112, "query"));
        track("interaction_layer", nn::grad_check(params, [&](nn::Tape& t) {
                  const nn::ValId refined = refine_features(t, t.param(qi), bank, layout, 2, 3);
                  const auto& vote = layout.votes[0];
                  const nn::ValId logits =
                      t.add_row(t.matmul(refined, t.param(vote.w)), t.param(vote.b));
                  return t.softmax_cross_entropy(logits, {0});
              }));
    }

    {  // full novel-task loss: backbone -> heads -> refine -> fuse -> loss
        SyntheticConfig sc;
        sc.n_videos = 4;
        sc.actions_per_video = 6;
        sc.n_verbs = 3;
        sc.n_nouns = 3;
        sc.feature_dim = 6;
        sc.rows_per_action = 8;
        sc.state_change_verbs = {0};
        sc.seed = 113;
        const Dataset ds = generate_synthetic(sc);
        GraphParams gp;
        gp.window = 3;
        gp.subsegments = 4;
        Model model = make_model(cfg, 6, specs_for(ds, gp, 6, {"ar", "pnr"}), 114);
        const SampleSet ar_train = build_samples(ds, model.tasks[0], 0);
        const BankMap banks = build_banks(model, ar_train, 1);
        InteractionConfig icfg;
        icfg.depth = 2;
        icfg.k = 2;
        icfg.backpack = {"ar", "pnr"};
        add_novel_stage(model, make_task_spec("oscc", ds.vocab, gp, 6), icfg);
        const SampleSet oscc = build_samples(ds, model.novel_task, 0);
        track("novel_loss", nn::grad_check(model.params, [&](nn::Tape& t) {
                  return novel_forward(t, model, banks, oscc.samples[0]).loss;
              }));
    }

    const double elapsed = seconds_since(t0);
    report(1, "gradient correctness",
           worst < 1e-4 && elapsed < 30.0,
           "max rel err " + std::to_string(worst) + " at " + worst_name + ", " +
               std::to_string(elapsed) + " s");
}

// ---- criterion 2: oracle equivalence ---------------------------------------

void criterion_oracles() {
    bool pass = true;
    std::string detail;

    {  // knn vs exhaustive sort, 200 queries x bank of 100
        Rng rng(201);
        PrototypeBank bank;
        bank.task = "ar";
        bank.dim = 16;
        for (int r = 0; r < 100; ++r) {
            bank.keys.emplace_back(r % 10, r / 10);
            bank.counts.push_back(1);
            for (int c = 0; c < 16; ++c) bank.values.push_back(static_cast<float>(rng.normal()));
        }
        int mismatches = 0;
        for (int q = 0; q < 200; ++q) {
            std::vector<double> query(16);
            for (auto& v : query) v = rng.normal();
            const int k = 1 + static_cast<int>(rng.bounded(10));
            std::vector<std::pair<double, int>> sims;
            for (int r = 0; r < 100; ++r) {
                double dot = 0, qn = 0, pn = 0;
                for (int c = 0; c < 16; ++c) {
                    dot += query[static_cast<size_t>(c)] * bank.row_ptr(r)[c];
                    qn += query[static_cast<size_t>(c)] * query[static_cast<size_t>(c)];
                    pn += static_cast<double>(bank.row_ptr(r)[c]) * bank.row_ptr(r)[c];
                }
                sims.emplace_back(dot / std::sqrt(qn * pn), r);
            }
            std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            std::vector<int> expected;
            for (int i = 0; i < k; ++i) expected.push_back(sims[static_cast<size_t>(i)].second);
            if (knn_cosine(query, bank, k) != expected) ++mismatches;
        }
        pass = pass && mismatches == 0;
        detail += "knn mismatches " + std::to_string(mismatches);
    }

    {  // edit distance vs DP oracle on 1000 random pairs
        Rng rng(202);
        int mismatches = 0;
        for (int trial = 0; trial < 1000; ++trial) {
            const size_t la = 1 + rng.bounded(20), lb = 1 + rng.bounded(20);
            std::vector<int> a(la), b(lb);
            for (auto& v : a) v = static_cast<int>(rng.bounded(7));
            for (auto& v : b) v = static_cast<int>(rng.bounded(7));
            // Full DP table, written independently of the production code.
            std::vector<std::vector<int>> d(la + 1, std::vector<int>(lb + 1, 0));
            for (size_t i = 0; i <= la; ++i) d[i][0] = static_cast<int>(i);
            for (size_t j = 0; j <= lb; ++j) d[0][j] = static_cast<int>(j);
            for (size_t i = 1; i <= la; ++i)
                for (size_t j = 1; j <= lb; ++j)
                    d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                                        d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
            const double expected = static_cast<double>(d[la][lb]) / static_cast<double>(lb);
            if (std::abs(edit_distance(a, b) - expected) > 0.0) ++mismatches;
        }
        pass = pass && mismatches == 0;
        detail += ", ed mismatches " + std::to_string(mismatches);
    }

    {  // prototype rows vs brute-force recomputation
        SyntheticConfig sc;
        sc.n_videos = 6;
        sc.actions_per_video = 8;
        sc.n_verbs = 4;
        sc.n_nouns = 4;
        sc.feature_dim = 8;
        sc.rows_per_action = 8;
        sc.state_change_verbs = {0};
        sc.seed = 203;
        const Dataset ds = generate_synthetic(sc);
        BackboneConfig cfg;
        cfg.layers = 2;
        cfg.input_dim = cfg.hidden_dim = 8;
        GraphParams gp;
        gp.window = 3;
        const Model model = make_model(cfg, 8, specs_for(ds, gp, 8, {"ar", "oscc"}), 204);
        const SampleSet ar_train = build_samples(ds, model.tasks[0], 0);
        const BankMap banks = build_banks(model, ar_train, 0);
        const auto features = prototype_features(model, ar_train, 1);
        double worst = 0.0;
        for (const auto& [task, bank] : banks) {
            for (int r = 0; r < bank.rows(); ++r) {
                Tensor sum(1, bank.dim);
                int count = 0;
                for (size_t s = 0; s < ar_train.samples.size(); ++s) {
                    const auto& g = ar_train.samples[s].graph;
                    const int tgt = g.target_indices()[0];
                    if (std::pair<int, int>{g.verb_labels[static_cast<size_t>(tgt)],
                                            g.noun_labels[static_cast<size_t>(tgt)]} !=
                        bank.keys[static_cast<size_t>(r)])
                        continue;
                    axpy(1.0, features.at(task)[s], sum);
                    ++count;
                }
                for (int c = 0; c < bank.dim; ++c)
                    worst = std::max(worst,
                                     std::abs(sum.at(0, c) / count - bank.row_ptr(r)[c]));
            }
        }
        pass = pass && worst < 1e-6;
        detail += ", prototype max dev " + std::to_string(worst);
    }

    report(2, "oracle equivalence", pass, detail);
}

// ---- criterion 3: structural invariants ------------------------------------

void criterion_structure() {
    bool pass = true;
    std::string detail = "all counts matched";

    FeatureSequence seq;
    seq.video_id = "sweep";
    const int n_actions = 12, rows_per = 16;
    seq.features = Tensor(n_actions * rows_per, 4);
    for (int r = 0; r < seq.features.rows; ++r) {
        for (int c = 0; c < 4; ++c) seq.features.at(r, c) = 0.1 * r + c;
        seq.timestamps.emplace_back(r * 0.5, (r + 1) * 0.5);
    }
    std::vector<ActionAnnotation> actions;
    for (int i = 0; i < n_actions; ++i)
        actions.push_back({"sweep", i * 8.0, (i + 1) * 8.0, i % 3, i % 4});

    for (int w = 1; w <= 9 && pass; ++w) {
        if (w % 2 == 0) {
            try {
                build_ar_graph(seq, actions, 0, w);
                pass = false;
                detail = "even window accepted";
            } catch (const ConfigError&) {
            }
            continue;
        }
        for (int target = 0; target < n_actions; ++target) {
            const TemporalGraph g = build_ar_graph(seq, actions, target, w);
            const int half = (w - 1) / 2;
            const int nodes = std::min(n_actions, target + half + 1) - std::max(0, target - half);
            int mask_count = 0;
            for (char m : g.target_mask) mask_count += m;
            if (g.num_nodes() != nodes || g.undirected_edge_count() != nodes - 1 ||
                mask_count != 1) {
                pass = false;
                detail = "ar mismatch at w=" + std::to_string(w);
                break;
            }
        }
    }

    for (int n_in = 1; n_in <= 3 && pass; ++n_in) {
        for (int z = 1; z <= 20; ++z) {
            Tensor obs(n_in, 4);
            for (int r = 0; r < n_in; ++r)
                for (int c = 0; c < 4; ++c) obs.at(r, c) = r + 0.25 * c;
            const TemporalGraph g = build_lta_graph(obs, z);

            std::set<std::pair<int, int>> expected;
            for (int i = 0; i < n_in + z; ++i)
                if (i + 1 < n_in + z) expected.insert({i, i + 1});
            for (int f = n_in; f < n_in + z; ++f)
                for (int o = 0; o < n_in; ++o) expected.insert({std::min(o, f), std::max(o, f)});

            Tensor mean(1, 4);
            for (int r = 0; r < n_in; ++r)
                for (int c = 0; c < 4; ++c) mean.at(0, c) += obs.at(r, c) / n_in;
            bool mean_ok = true;
            for (int f = n_in; f < n_in + z; ++f)
                for (int c = 0; c < 4; ++c)
                    mean_ok = mean_ok && g.node_features.at(f, c) == mean.at(0, c);

            if (g.num_nodes() != n_in + z ||
                g.undirected_edge_count() != static_cast<int>(expected.size()) ||
                static_cast<int>(g.target_indices().size()) != z || !mean_ok) {
                pass = false;
                detail = "lta mismatch at N=" + std::to_string(n_in) + " Z=" + std::to_string(z);
                break;
            }
        }
    }

    for (int n : {1, 4, 16}) {
        if (!pass) break;
        const ClipAnnotation clip{"sweep", 0.0, 8.0, 1, 3.21};
        const TemporalGraph g = build_clip_graph(seq, clip, n, TaskKind::node_localization);
        int ones = 0;
        for (int l : g.node_labels) ones += l;
        if (g.num_nodes() != n || g.undirected_edge_count() != n - 1 || ones != 1) {
            pass = false;
            detail = "clip mismatch at n=" + std::to_string(n);
        }
    }

    report(3, "structural invariants", pass, detail);
}

// ---- criteria 4 and 5 share a small trained fixture ------------------------

struct SmallFixture {
    Dataset ds;
    GraphParams gp;
    BackboneConfig cfg;
    std::vector<TaskSpec> mtl_tasks;
    TrainConfig tc;

    SmallFixture() {
        SyntheticConfig sc;
        sc.n_videos = 10;
        sc.actions_per_video = 8;
        sc.n_verbs = 4;
        sc.n_nouns = 5;
        sc.feature_dim = 12;
        sc.rows_per_action = 8;
        sc.noise_sigma = 0.5;
        sc.state_change_verbs = {0, 1};
        sc.seed = 401;
        ds = generate_synthetic(sc);
        gp.window = 3;
        gp.observed = 2;
        gp.anticipate = 3;
        gp.subsegments = 4;
        cfg.layers = 2;
        cfg.input_dim = cfg.hidden_dim = 12;
        mtl_tasks = specs_for(ds, gp, 12, {"ar", "oscc", "pnr"});
        tc.epochs_per_task = {{"ar", 1}, {"lta", 1}, {"oscc", 1}, {"pnr", 1}};
        tc.mtl_epochs = 1;
        tc.lr = 1e-3;
        tc.warmup_epochs = 1;
        tc.batch_size = 8;
        tc.seed = 402;
        tc.threads = 0;
    }
};

void criterion_freezing(const SmallFixture& fx) {
    bool pass = true;
    std::string detail;

    const ModelState mtl = train_mtl(fx.mtl_tasks, fx.ds, fx.cfg, 12, fx.tc);
    const SampleSet ar_train = build_samples(fx.ds, fx.mtl_tasks[0], 0);
    BankMap banks = build_banks(mtl.model, ar_train, 0);
    std::map<std::string, uint32_t> crc_before;
    for (const auto& [task, bank] : banks) crc_before[task] = bank.payload_crc();

    // Novel task LTA: banks and backbone must come out bit-identical.
    InteractionConfig icfg;
    icfg.depth = 2;
    icfg.k = 3;
    icfg.backpack = {"ar", "oscc", "pnr"};
    const TaskSpec lta = make_task_spec("lta", fx.ds.vocab, fx.gp, 12);
    const ModelState novel = train_novel(mtl, banks, lta, fx.ds, fx.tc, icfg);

    for (const auto& [task, bank] : banks)
        if (bank.payload_crc() != crc_before[task]) {
            pass = false;
            detail = "bank " + task + " changed";
        }
    for (int i : mtl.model.backbone_param_indices()) {
        const int j = novel.model.params.find(mtl.model.params[i].name);
        if (max_abs_diff(mtl.model.params[i].value, novel.model.params[j].value) != 0.0) {
            pass = false;
            detail = "backbone moved under LTA novel training";
            break;
        }
    }

    // Finite-difference on a bank row that the forward never selects.
    Model probe = mtl.model;
    add_novel_stage(probe, make_task_spec("lta", fx.ds.vocab, fx.gp, 12), icfg);
    const SampleSet lta_samples = build_samples(fx.ds, probe.novel_task, 0);
    NeighborLog log;
    nn::Tape t(&probe.params);
    const double base =
        t.value(novel_forward(t, probe, banks, lta_samples.samples[0], &log).loss).at(0, 0);
    std::set<int> selected;
    for (const auto& e : log.entries)
        if (e.task == "ar")
            for (int r : e.rows) selected.insert(r);
    int untouched = -1;
    for (int r = 0; r < banks.at("ar").rows(); ++r)
        if (!selected.count(r)) untouched = r;
    if (untouched < 0) {
        pass = false;
        detail += "; no unselected row to probe";
    } else {
        PrototypeBank& bank = banks.at("ar");
        const float saved = bank.values[static_cast<size_t>(untouched) * bank.dim + 1];
        bank.values[static_cast<size_t>(untouched) * bank.dim + 1] = saved + 1e-3f;
        nn::Tape t2(&probe.params);
        const double perturbed =
            t2.value(novel_forward(t2, probe, banks, lta_samples.samples[0]).loss).at(0, 0);
        bank.values[static_cast<size_t>(untouched) * bank.dim + 1] = saved;
        if (perturbed != base) {
            pass = false;
            detail += "; fd perturbation leaked into the loss";
        }
    }

    if (pass) detail = "banks + backbone bit-identical, fd delta exactly 0";
    report(4, "freezing contracts", pass, detail);
}

void criterion_degeneracy(const SmallFixture& fx) {
    bool pass = true;
    std::string detail;

    {  // residual identity with a zeroed stack
        BackboneConfig cfg = fx.cfg;
        nn::ParamSet params;
        const BackboneLayout layout = init_backbone(params, cfg, 501);
        for (const auto& l : layout.layers)
            for (int idx : {l.w_r, l.w, l.w_p, l.b, l.b_p, l.ln_bias})
                std::fill(params[idx].value.data.begin(), params[idx].value.data.end(), 0.0);
        const TemporalGraph g = chain_graph(5, 12, 502);
        const Tensor x = features_with_positions(g);
        nn::Tape t(&params);
        const double dev =
            max_abs_diff(t.value(backbone_forward(t, t.leaf(x), neighbor_mean_matrix(g), cfg, layout)), x);
        if (dev > 1e-12) {
            pass = false;
            detail = "residual identity broke (" + std::to_string(dev) + ")";
        }
    }

    {  // MLP baseline == zero-message temporal model on 1-node graphs
        TaskSpec one_node = make_task_spec("ar", fx.ds.vocab, fx.gp, 12);
        one_node.graph.window = 1;
        const SampleSet stripped = build_samples(fx.ds, one_node, 1, true);
        const SampleSet plain = build_samples(fx.ds, one_node, 1, false);
        Model model = make_model(fx.cfg, 12, {one_node}, 503);
        Model zeroed = model;
        for (const auto& l : zeroed.backbone.layers) {
            std::fill(zeroed.params[l.w].value.data.begin(), zeroed.params[l.w].value.data.end(), 0.0);
            std::fill(zeroed.params[l.w_p].value.data.begin(), zeroed.params[l.w_p].value.data.end(),
                      0.0);
        }
        double dev = 0.0;
        for (size_t i = 0; i < std::min<size_t>(plain.samples.size(), 8); ++i) {
            nn::Tape t1(&model.params);
            const TaskForward a = task_forward(t1, model, one_node, stripped.samples[i]);
            nn::Tape t2(&zeroed.params);
            const TaskForward b = task_forward(t2, zeroed, one_node, plain.samples[i]);
            dev = std::max({dev, max_abs_diff(a.logits[0], b.logits[0]),
                            max_abs_diff(a.logits[1], b.logits[1])});
        }
        if (dev > 1e-6) {
            pass = false;
            detail += "; mlp equivalence dev " + std::to_string(dev);
        }
    }

    {  // train_novel with interaction disabled == MTL+FT update set
        const ModelState mtl =
            train_mtl({fx.mtl_tasks[0], fx.mtl_tasks[2]}, fx.ds, fx.cfg, 12, fx.tc);
        InteractionConfig off;
        off.depth = 1;
        off.k = 0;
        const TaskSpec oscc = make_task_spec("oscc", fx.ds.vocab, fx.gp, 12);
        const ModelState a = train_novel(mtl, BankMap{}, oscc, fx.ds, fx.tc, off);
        const ModelState b = train_mtl_ft(mtl, oscc, fx.ds, fx.tc);
        auto updated = [&](const ModelState& s) {
            std::set<std::string> names;
            for (int i = 0; i < s.model.params.size(); ++i) {
                const int j = mtl.model.params.find(s.model.params[i].name);
                if (j < 0 || max_abs_diff(s.model.params[i].value, mtl.model.params[j].value) > 0.0)
                    names.insert(s.model.params[i].name);
            }
            return names;
        };
        if (updated(a) != updated(b)) {
            pass = false;
            detail += "; k=0 update set differs from mtl-ft";
        }
    }

    if (pass) detail = "residual identity, mlp equivalence, k=0 == mtl-ft";
    report(5, "degeneracy equivalences", pass, detail);
}

// ---- criterion 6: synthetic transfer ----------------------------------------

void criterion_transfer() {
    const auto t0 = Clock::now();

    const SyntheticConfig data_cfg;  // the default desk-scale configuration
    const Dataset ds = generate_synthetic(data_cfg);

    BackboneConfig cfg;
    cfg.layers = 3;
    cfg.input_dim = data_cfg.feature_dim;
    cfg.hidden_dim = 64;
    GraphParams gp;  // defaults: w=9, N=2, Z=20, oscc 4 sub-segments
    GraphParams pnr_gp = gp;
    pnr_gp.subsegments = 16;

    TrainConfig tc;
    tc.epochs_per_task = {{"ar", 2}, {"lta", 2}, {"oscc", 2}, {"pnr", 2}};
    tc.mtl_epochs = 2;
    tc.lr = 1e-3;
    tc.warmup_epochs = 2;
    tc.batch_size = 16;
    tc.threads = 0;

    const TaskSpec oscc = make_task_spec("oscc", ds.vocab, gp, 64);
    const SampleSet oscc_val = build_samples(ds, oscc, 1);

    std::vector<double> egopack_acc, single_acc;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig stc = tc;
        stc.seed = seed;

        std::vector<TaskSpec> mtl_tasks{make_task_spec("ar", ds.vocab, gp, 64),
                                        make_task_spec("lta", ds.vocab, gp, 64),
                                        make_task_spec("pnr", ds.vocab, pnr_gp, 64)};
        const ModelState mtl = train_mtl(mtl_tasks, ds, cfg, 64, stc);
        const SampleSet ar_train = build_samples(ds, mtl_tasks[0], 0);
        const BankMap banks = build_banks(mtl.model, ar_train, 0);

        InteractionConfig icfg;
        icfg.depth = 3;
        icfg.k = 4;
        icfg.backpack = {"ar", "lta", "pnr"};
        const ModelState ego = train_novel(mtl, banks, oscc, ds, stc, icfg);
        egopack_acc.push_back(
            evaluate(ego.model, &banks, oscc, oscc_val, 0).metrics.at("accuracy"));

        const ModelState single = train_mtl({oscc}, ds, cfg, 64, stc);
        single_acc.push_back(
            evaluate(single.model, nullptr, oscc, oscc_val, 0).metrics.at("accuracy"));
    }

    double ego_mean = 0, single_mean = 0;
    for (double v : egopack_acc) ego_mean += v / 5.0;
    for (double v : single_acc) single_mean += v / 5.0;

    // Single-task AR verb accuracy vs 1/12 chance.
    TrainConfig atc = tc;
    atc.seed = 1;
    const TaskSpec ar = make_task_spec("ar", ds.vocab, gp, 64);
    const ModelState ar_model = train_mtl({ar}, ds, cfg, 64, atc);
    const double verb_acc =
        evaluate(ar_model.model, nullptr, ar, build_samples(ds, ar, 1), 0).metrics.at("verb_top1");

    const double elapsed = seconds_since(t0);
    const bool pass = ego_mean >= single_mean && verb_acc >= 3.0 / 12.0 && elapsed < 900.0;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "egopack oscc %.4f vs single %.4f over 5 seeds, ar verb %.4f (chance 0.0833), %.0f s",
                  ego_mean, single_mean, verb_acc, elapsed);
    report(6, "synthetic transfer", pass, buf);
}

// ---- criterion 7: determinism ------------------------------------------------

void criterion_determinism(const SmallFixture& fx) {
    std::vector<double> a, b;
    TrainConfig tc = fx.tc;
    tc.mtl_epochs = 2;
    train_mtl({fx.mtl_tasks[0], fx.mtl_tasks[1]}, fx.ds, fx.cfg, 12, tc,
              [&](const EpochMetrics& em) { a.push_back(em.total_loss); });
    train_mtl({fx.mtl_tasks[0], fx.mtl_tasks[1]}, fx.ds, fx.cfg, 12, tc,
              [&](const EpochMetrics& em) { b.push_back(em.total_loss); });
    const bool pass = a == b && !a.empty();
    report(7, "determinism", pass,
           pass ? "identical epoch metrics across reruns" : "loss curves diverged");
}

// ---- criterion 8: metric arithmetic -------------------------------------------

void criterion_metric_arithmetic() {
    const AggregateInputs row{0.2510, 0.3110, 0.7183, 0.728, 0.752, 0.61};
    const double score = aggregate_score(row);
    const bool pass = std::abs(score - 0.3651) <= 1e-4;
    report(8, "aggregate-score arithmetic", pass,
           "score " + std::to_string(score) + " vs 0.3651 +- 1e-4");
}

// ---- criterion 9: sweep harness -----------------------------------------------

void criterion_sweeps() {
    SyntheticConfig sc;
    sc.n_videos = 20;
    sc.actions_per_video = 12;
    sc.n_verbs = 6;
    sc.n_nouns = 6;
    sc.feature_dim = 12;
    sc.rows_per_action = 8;
    sc.noise_sigma = 0.5;
    sc.state_change_verbs = {0, 1, 2};
    sc.seed = 901;
    const Dataset ds = generate_synthetic(sc);
    GraphParams gp;
    gp.window = 3;
    gp.observed = 2;
    gp.anticipate = 3;
    gp.subsegments = 4;
    BackboneConfig cfg;
    cfg.layers = 2;
    cfg.input_dim = cfg.hidden_dim = 12;
    TrainConfig tc;
    tc.epochs_per_task = {{"ar", 1}, {"lta", 1}, {"oscc", 1}, {"pnr", 1}};
    tc.mtl_epochs = 1;
    tc.lr = 1e-3;
    tc.warmup_epochs = 1;
    tc.batch_size = 16;
    tc.seed = 902;

    const std::vector<TaskSpec> mtl_tasks = specs_for(ds, gp, 12, {"ar", "pnr"});
    const ModelState mtl = train_mtl(mtl_tasks, ds, cfg, 12, tc);
    const SampleSet ar_train = build_samples(ds, mtl_tasks[0], 0);
    const BankMap banks = build_banks(mtl.model, ar_train, 0);
    const TaskSpec oscc = make_task_spec("oscc", ds.vocab, gp, 12);
    const SampleSet oscc_val = build_samples(ds, oscc, 1);

    bool pass = banks.at("ar").rows() >= 16;
    std::string detail = "bank rows " + std::to_string(banks.at("ar").rows());

    std::vector<std::pair<int, double>> k_table, depth_table;
    for (int k : {0, 1, 2, 4, 8, 16}) {
        InteractionConfig icfg;
        icfg.depth = 2;
        icfg.k = k;
        icfg.backpack = {"ar", "pnr"};
        const ModelState m = train_novel(mtl, banks, oscc, ds, tc, icfg);
        const double acc =
            evaluate(m.model, k > 0 ? &banks : nullptr, oscc, oscc_val, 0).metrics.at("accuracy");
        if (!std::isfinite(acc)) pass = false;
        k_table.emplace_back(k, acc);
    }
    for (int depth = 1; depth <= 5; ++depth) {
        InteractionConfig icfg;
        icfg.depth = depth;
        icfg.k = 4;
        icfg.backpack = {"ar", "pnr"};
        const ModelState m = train_novel(mtl, banks, oscc, ds, tc, icfg);
        const double acc = evaluate(m.model, &banks, oscc, oscc_val, 0).metrics.at("accuracy");
        if (!std::isfinite(acc)) pass = false;
        depth_table.emplace_back(depth, acc);
    }

    pass = pass && k_table.size() == 6 && depth_table.size() == 5;
    detail += "; k grid";
    for (auto [k, acc] : k_table) detail += " " + std::to_string(k) + ":" + std::to_string(acc).substr(0, 5);
    detail += "; depth grid complete";
    report(9, "sweep harness", pass, detail);
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    criterion_gradients();
    criterion_oracles();
    criterion_structure();
    const SmallFixture fx;
    criterion_freezing(fx);
    criterion_degeneracy(fx);
    criterion_determinism(fx);
    criterion_metric_arithmetic();
    criterion_sweeps();
    criterion_transfer();
    std::printf("acceptance finished in %.1f s with %d failure(s)\n", seconds_since(t0),
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
