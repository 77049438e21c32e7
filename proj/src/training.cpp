#include "egopack/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include "egopack/metrics.hpp"
#include "egopack/rng.hpp"
#include "json.hpp"

namespace egopack {

using nlohmann::json;

int TrainConfig::epochs_for(const std::string& task) const {
    auto it = epochs_per_task.find(task);
    if (it == epochs_per_task.end()) throw ConfigError("no epoch count configured for task " + task);
    return it->second;
}

void TrainConfig::validate() const {
    for (const auto& [task, e] : epochs_per_task)
        if (e < 1) throw ConfigError("train.epochs." + task + " must be positive");
    if (mtl_epochs < 1) throw ConfigError("train.mtl_epochs must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("train.lr must be positive");
}

// --- batch iterator --------------------------------------------------------

BatchIterator::BatchIterator(int n, uint64_t seed, const std::string& tag)
    : n_(n), seed_(seed), tag_(tag) {
    if (n < 1) throw ConfigError("BatchIterator over empty sample set");
    reshuffle();
}

void BatchIterator::reshuffle() {
    cycle_ += 1;
    pos_ = 0;
    order_.resize(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) order_[static_cast<size_t>(i)] = i;
    Rng rng(mix_seed(seed_, tag_ + "#cycle" + std::to_string(cycle_)));
    rng.shuffle(order_);
}

std::vector<int> BatchIterator::next(int batch) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(batch));
    for (int i = 0; i < batch; ++i) {
        if (pos_ >= n_) reshuffle();
        out.push_back(order_[static_cast<size_t>(pos_++)]);
    }
    return out;
}

void BatchIterator::advance(long consumed) {
    const long cycles = consumed / n_;
    const int pos = static_cast<int>(consumed % n_);
    cycle_ = -1;
    for (long c = 0; c <= cycles; ++c) reshuffle();
    pos_ = pos;
}

// --- parallel per-sample gradients ------------------------------------------

namespace {

// Builds the forward for global job index i and returns the scalar loss node.
using BuildFn = std::function<nn::ValId(nn::Tape&, int)>;

// Runs `count` independent sample tapes, each weighted into its own gradient
// buffer; buffers are reduced into params in job order, so the result does
// not depend on the thread count.
std::vector<double> batch_backward(nn::ParamSet& params, int count, double weight,
                                   const BuildFn& build, int threads) {
    std::vector<double> losses(static_cast<size_t>(count), 0.0);
    std::vector<nn::GradBuffer> buffers(static_cast<size_t>(count));
    const int workers = std::min(resolve_threads(threads), std::max(count, 1));
    auto work = [&](int w) {
        for (int i = w; i < count; i += workers) {
            nn::Tape t(&params);
            const nn::ValId loss = build(t, i);
            losses[static_cast<size_t>(i)] = t.value(loss).at(0, 0);
            const nn::ValId weighted = t.scale(loss, weight);
            t.backward(weighted);
            buffers[static_cast<size_t>(i)] = t.take_param_grads();
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();
    for (const auto& buf : buffers) buf.accumulate_into(params);
    return losses;
}

long steps_per_epoch(const std::vector<SampleSet>& sets, int batch) {
    long steps = 0;
    for (const auto& s : sets)
        steps = std::max<long>(steps,
                               (static_cast<long>(s.samples.size()) + batch - 1) / batch);
    return steps;
}

}  // namespace

// --- training loops -----------------------------------------------------------

namespace {

// Shared epoch loop over one or more tasks. `forward` builds the loss for
// (task index, sample index).
void run_epochs(ModelState& state, const std::vector<SampleSet>& sets, const TrainConfig& tc,
                int total_epochs,
                const std::function<nn::ValId(nn::Tape&, int, int)>& forward,
                const EpochSink& sink) {
    const int k = static_cast<int>(sets.size());
    const long steps = steps_per_epoch(sets, tc.batch_size);

    std::vector<BatchIterator> iters;
    for (const auto& s : sets)
        iters.emplace_back(static_cast<int>(s.samples.size()), tc.seed, "shuffle/" + s.spec.name);
    const long consumed = static_cast<long>(state.epoch) * steps * tc.batch_size;
    if (consumed > 0)
        for (auto& it : iters) it.advance(consumed);

    state.opt.lr = tc.lr;
    state.opt.ensure_shapes(state.model.params);

    for (int epoch = state.epoch; epoch < total_epochs; ++epoch) {
        const double lr_factor = nn::warmup_factor(epoch, tc.warmup_epochs);
        std::vector<double> loss_sum(static_cast<size_t>(k), 0.0);
        std::vector<long> loss_count(static_cast<size_t>(k), 0);

        for (long step = 0; step < steps; ++step) {
            struct Job {
                int task;
                int sample;
            };
            std::vector<Job> jobs;
            for (int ti = 0; ti < k; ++ti)
                for (int s : iters[static_cast<size_t>(ti)].next(tc.batch_size))
                    jobs.push_back({ti, s});
            const double weight = 1.0 / (static_cast<double>(k) * tc.batch_size);
            const auto losses = batch_backward(
                state.model.params, static_cast<int>(jobs.size()), weight,
                [&](nn::Tape& t, int i) {
                    return forward(t, jobs[static_cast<size_t>(i)].task,
                                   jobs[static_cast<size_t>(i)].sample);
                },
                tc.threads);
            for (size_t i = 0; i < jobs.size(); ++i) {
                loss_sum[static_cast<size_t>(jobs[i].task)] += losses[i];
                loss_count[static_cast<size_t>(jobs[i].task)] += 1;
            }
            nn::adam_step(state.model.params, state.opt, lr_factor);
        }

        EpochMetrics em;
        em.epoch = epoch;
        double total = 0.0;
        for (int ti = 0; ti < k; ++ti) {
            const double mean = loss_sum[static_cast<size_t>(ti)] /
                                std::max<long>(1, loss_count[static_cast<size_t>(ti)]);
            em.task_loss[sets[static_cast<size_t>(ti)].spec.name] = mean;
            total += mean;
        }
        em.total_loss = total / k;
        state.epoch = epoch + 1;
        if (sink) sink(em);
    }
}

}  // namespace

ModelState train_mtl(const std::vector<TaskSpec>& tasks, const Dataset& ds,
                     const BackboneConfig& bcfg, int head_dim, const TrainConfig& tc,
                     const EpochSink& sink, const ModelState* resume, bool strip_edges) {
    tc.validate();
    if (tasks.empty()) throw ConfigError("train_mtl: at least one task required");

    std::vector<SampleSet> sets;
    for (const auto& spec : tasks) {
        sets.push_back(build_samples(ds, spec, 0, strip_edges));
        if (sets.back().samples.empty())
            throw ConfigError("train_mtl: task " + spec.name + " has no training samples");
    }

    ModelState state;
    if (resume != nullptr) {
        state = *resume;
    } else {
        state.model = make_model(bcfg, head_dim, tasks, tc.seed);
        state.seed = tc.seed;
    }
    for (auto& p : state.model.params.items()) p.trainable = true;

    const int epochs = tasks.size() == 1 ? tc.epochs_for(tasks[0].name) : tc.mtl_epochs;
    run_epochs(state, sets, tc, epochs,
               [&](nn::Tape& t, int task, int sample) {
                   return task_forward(t, state.model, sets[static_cast<size_t>(task)].spec,
                                       sets[static_cast<size_t>(task)]
                                           .samples[static_cast<size_t>(sample)])
                       .loss;
               },
               sink);
    return state;
}

ModelState train_novel(const ModelState& mtl_state, const BankMap& banks, const TaskSpec& novel,
                       const Dataset& ds, const TrainConfig& tc, const InteractionConfig& icfg,
                       const EpochSink& sink) {
    tc.validate();
    icfg.validate();
    if (icfg.k > 0) {
        for (const auto& task : icfg.backpack) {
            auto it = banks.find(task);
            if (it == banks.end()) throw ConfigError("train_novel: missing bank for task " + task);
            if (!it->second.frozen) throw ConfigError("train_novel: bank " + task + " is not frozen");
        }
    }

    ModelState state;
    state.model = mtl_state.model;
    state.seed = tc.seed;
    add_novel_stage(state.model, novel, icfg);

    // Appendix-A behavior: LTA as the novel task keeps the temporal model
    // frozen.
    const bool freeze = tc.freeze_backbone || novel.name == "lta";
    for (auto& p : state.model.params.items()) p.trainable = true;
    if (freeze)
        for (int i : state.model.backbone_param_indices())
            state.model.params[i].trainable = false;

    std::vector<SampleSet> sets{build_samples(ds, novel, 0)};
    if (sets[0].samples.empty()) throw ConfigError("train_novel: no training samples for " + novel.name);

    run_epochs(state, sets, tc, tc.epochs_for(novel.name),
               [&](nn::Tape& t, int, int sample) {
                   return novel_forward(t, state.model, banks,
                                        sets[0].samples[static_cast<size_t>(sample)])
                       .loss;
               },
               sink);
    return state;
}

ModelState train_mtl_ft(const ModelState& mtl_state, const TaskSpec& novel, const Dataset& ds,
                        const TrainConfig& tc, const EpochSink& sink) {
    tc.validate();
    ModelState state;
    state.model = mtl_state.model;
    state.seed = tc.seed;
    InteractionConfig off;
    off.depth = 1;
    off.k = 0;
    off.backpack = {};
    add_novel_stage(state.model, novel, off);

    const bool freeze = tc.freeze_backbone || novel.name == "lta";
    for (auto& p : state.model.params.items()) p.trainable = true;
    if (freeze)
        for (int i : state.model.backbone_param_indices())
            state.model.params[i].trainable = false;

    std::vector<SampleSet> sets{build_samples(ds, novel, 0)};
    if (sets[0].samples.empty())
        throw ConfigError("train_mtl_ft: no training samples for " + novel.name);

    run_epochs(state, sets, tc, tc.epochs_for(novel.name),
               [&](nn::Tape& t, int, int sample) {
                   return task_forward(t, state.model, novel,
                                       sets[0].samples[static_cast<size_t>(sample)],
                                       &state.model.novel_head)
                       .loss;
               },
               sink);
    return state;
}

// --- evaluation ---------------------------------------------------------------

namespace {

int argmax_row(const Tensor& logits, int row) {
    int best = 0;
    for (int c = 1; c < logits.cols; ++c)
        if (logits.at(row, c) > logits.at(row, best)) best = c;
    return best;
}

}  // namespace

EvalOutput evaluate(const Model& model, const BankMap* banks, const TaskSpec& spec,
                    const SampleSet& samples, int threads) {
    const bool use_backpack = model.has_novel && banks != nullptr &&
                              spec.name == model.novel_task.name && model.icfg.k > 0;
    const bool use_novel_head = model.has_novel && spec.name == model.novel_task.name;
    if (use_novel_head && !use_backpack && model.icfg.k > 0)
        throw ConfigError("evaluating a backpack model requires its prototype banks");

    const int n = static_cast<int>(samples.samples.size());
    EvalOutput out;
    out.records.resize(static_cast<size_t>(n));
    std::vector<NeighborLog> logs(static_cast<size_t>(n));

    const int workers = std::min(resolve_threads(threads), std::max(n, 1));
    auto work = [&](int w) {
        for (int i = w; i < n; i += workers) {
            const TaskSample& sample = samples.samples[static_cast<size_t>(i)];
            PredRecord rec;
            nn::Tape t(&model.params);
            std::vector<Tensor> logits;
            std::vector<int> rows;
            if (use_backpack) {
                NovelForward f = novel_forward(t, model, *banks, sample,
                                               &logs[static_cast<size_t>(i)]);
                logits = f.fused_logits;
                rows = f.target_rows;
                // Contributor streams at the first target row for agreement.
                for (size_t o = 0; o < f.novel_logits.size(); ++o)
                    rec.contributor_pred["novel"].push_back(argmax_row(f.novel_logits[o], 0));
                for (const auto& [task, votes] : f.votes)
                    for (size_t o = 0; o < votes.size(); ++o)
                        rec.contributor_pred[task].push_back(argmax_row(votes[o], 0));
                for (size_t o = 0; o < f.fused_logits.size(); ++o)
                    rec.contributor_pred["fused"].push_back(argmax_row(f.fused_logits[o], 0));
            } else if (use_novel_head) {
                NovelForward f = novel_forward(t, model, BankMap{}, sample, nullptr);
                logits = f.fused_logits;
                rows = f.target_rows;
            } else {
                TaskForward f = task_forward(t, model, spec, sample);
                logits = f.logits;
                rows = f.target_rows;
            }

            switch (spec.kind) {
                case TaskKind::node_classification:
                case TaskKind::future_node_classification:
                    for (size_t r = 0; r < rows.size(); ++r) {
                        rec.gt_verb.push_back(
                            sample.graph.verb_labels[static_cast<size_t>(rows[r])]);
                        rec.gt_noun.push_back(
                            sample.graph.noun_labels[static_cast<size_t>(rows[r])]);
                        rec.pred_verb.push_back(argmax_row(logits[0], static_cast<int>(r)));
                        rec.pred_noun.push_back(argmax_row(logits[1], static_cast<int>(r)));
                    }
                    break;
                case TaskKind::graph_classification:
                    rec.gt_label = sample.graph.graph_label.value();
                    rec.pred_label = argmax_row(logits[0], 0);
                    break;
                case TaskKind::node_localization: {
                    std::vector<double> node_logits;
                    for (int r = 0; r < logits[0].rows; ++r)
                        node_logits.push_back(logits[0].at(r, 0));
                    rec.gt_time = sample.graph.keyframe_s.value();
                    size_t best = 0;
                    for (size_t r = 1; r < node_logits.size(); ++r)
                        if (node_logits[r] > node_logits[best]) best = r;
                    rec.pred_time = sample.graph.node_center_s[best];
                    rec.loc_err =
                        pnr_loc_error(node_logits, sample.graph.node_center_s, rec.gt_time);
                    break;
                }
            }
            out.records[static_cast<size_t>(i)] = std::move(rec);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& th : pool) th.join();

    for (auto& log : logs)
        for (auto& e : log.entries) out.neighbors.entries.push_back(std::move(e));

    // Aggregate per-task metrics.
    if (spec.kind == TaskKind::node_classification) {
        std::vector<int> pv, gv, pn, gn;
        for (const auto& r : out.records) {
            pv.insert(pv.end(), r.pred_verb.begin(), r.pred_verb.end());
            gv.insert(gv.end(), r.gt_verb.begin(), r.gt_verb.end());
            pn.insert(pn.end(), r.pred_noun.begin(), r.pred_noun.end());
            gn.insert(gn.end(), r.gt_noun.begin(), r.gt_noun.end());
        }
        out.metrics["verb_top1"] = top1_accuracy(pv, gv);
        out.metrics["noun_top1"] = top1_accuracy(pn, gn);
    } else if (spec.kind == TaskKind::future_node_classification) {
        double ved = 0.0, ned = 0.0;
        for (const auto& r : out.records) {
            ved += edit_distance(r.pred_verb, r.gt_verb);
            ned += edit_distance(r.pred_noun, r.gt_noun);
        }
        out.metrics["verb_ed"] = ved / std::max<size_t>(1, out.records.size());
        out.metrics["noun_ed"] = ned / std::max<size_t>(1, out.records.size());
    } else if (spec.kind == TaskKind::graph_classification) {
        std::vector<int> p, g;
        for (const auto& r : out.records) {
            p.push_back(r.pred_label);
            g.push_back(r.gt_label);
        }
        out.metrics["accuracy"] = top1_accuracy(p, g);
    } else {
        double err = 0.0;
        for (const auto& r : out.records) err += r.loc_err;
        out.metrics["loc_err_s"] = err / std::max<size_t>(1, out.records.size());
    }
    return out;
}

// --- checkpoints ----------------------------------------------------------------

namespace {

constexpr const char* kCkptMagic = "EGOPACK_CKPT1";

json task_spec_to_json(const TaskSpec& spec) {
    const char* kind = nullptr;
    switch (spec.kind) {
        case TaskKind::node_classification: kind = "node-classification"; break;
        case TaskKind::future_node_classification: kind = "future-node-classification"; break;
        case TaskKind::graph_classification: kind = "graph-classification"; break;
        case TaskKind::node_localization: kind = "node-localization"; break;
    }
    return json{{"name", spec.name},
                {"kind", kind},
                {"head_dim", spec.head_dim},
                {"output_dims", spec.output_dims},
                {"graph",
                 {{"window", spec.graph.window},
                  {"observed", spec.graph.observed},
                  {"anticipate", spec.graph.anticipate},
                  {"subsegments", spec.graph.subsegments},
                  {"tau_hops", spec.graph.tau_hops}}}};
}

TaskSpec task_spec_from_json(const json& j) {
    TaskSpec spec;
    spec.name = j.at("name").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "node-classification") spec.kind = TaskKind::node_classification;
    else if (kind == "future-node-classification") spec.kind = TaskKind::future_node_classification;
    else if (kind == "graph-classification") spec.kind = TaskKind::graph_classification;
    else if (kind == "node-localization") spec.kind = TaskKind::node_localization;
    else throw IoError("checkpoint has unknown task kind: " + kind);
    spec.head_dim = j.at("head_dim").get<int>();
    spec.output_dims = j.at("output_dims").get<std::vector<int>>();
    const auto& g = j.at("graph");
    spec.graph.window = g.at("window").get<int>();
    spec.graph.observed = g.at("observed").get<int>();
    spec.graph.anticipate = g.at("anticipate").get<int>();
    spec.graph.subsegments = g.at("subsegments").get<int>();
    spec.graph.tau_hops = g.at("tau_hops").get<int>();
    return spec;
}

void append_tensor(std::string& payload, const Tensor& t) {
    static_assert(sizeof(double) == 8);
    payload.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * 8);
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
    const Model& m = state.model;
    json header;
    header["epoch"] = state.epoch;
    header["seed"] = state.seed;
    header["adam"] = {{"lr", state.opt.lr},   {"beta1", state.opt.beta1}, {"beta2", state.opt.beta2},
                      {"eps", state.opt.eps}, {"step", state.opt.step}};
    header["model"] = {{"layers", m.cfg.layers},
                       {"input_dim", m.cfg.input_dim},
                       {"hidden_dim", m.cfg.hidden_dim},
                       {"leaky_slope", m.cfg.leaky_slope},
                       {"ln_eps", m.cfg.ln_eps},
                       {"head_dim", m.head_dim},
                       {"init_seed", m.init_seed}};
    header["tasks"] = json::array();
    for (const auto& t : m.tasks) header["tasks"].push_back(task_spec_to_json(t));
    if (m.has_novel) {
        header["novel"] = {{"task", task_spec_to_json(m.novel_task)},
                           {"depth", m.icfg.depth},
                           {"k", m.icfg.k},
                           {"backpack", m.icfg.backpack}};
    }

    std::string payload;
    json tensors = json::array();
    auto emit = [&](const std::string& name, const Tensor& t) {
        tensors.push_back({{"name", name}, {"rows", t.rows}, {"cols", t.cols}});
        append_tensor(payload, t);
    };
    for (const auto& p : m.params.items()) emit(p.name, p.value);
    nn::AdamState opt = state.opt;
    opt.ensure_shapes(m.params);
    for (int i = 0; i < m.params.size(); ++i) {
        emit("opt/" + m.params[i].name + "/m", opt.m[static_cast<size_t>(i)]);
        emit("opt/" + m.params[i].name + "/v", opt.v[static_cast<size_t>(i)]);
    }
    header["tensors"] = std::move(tensors);
    header["crc32"] = crc32_bytes(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out << kCkptMagic << "\n" << header.dump() << "\n";
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing checkpoint: " + path.string());
    std::string magic, header_line;
    if (!std::getline(in, magic) || magic != kCkptMagic)
        throw IoError("not a checkpoint file: " + path.string());
    if (!std::getline(in, header_line)) throw IoError("truncated checkpoint header: " + path.string());
    json header = json::parse(header_line, nullptr, false);
    if (header.is_discarded()) throw IoError("corrupt checkpoint header: " + path.string());

    BackboneConfig cfg;
    const auto& jm = header.at("model");
    cfg.layers = jm.at("layers").get<int>();
    cfg.input_dim = jm.at("input_dim").get<int>();
    cfg.hidden_dim = jm.at("hidden_dim").get<int>();
    cfg.leaky_slope = jm.at("leaky_slope").get<double>();
    cfg.ln_eps = jm.at("ln_eps").get<double>();

    std::vector<TaskSpec> tasks;
    for (const auto& t : header.at("tasks")) tasks.push_back(task_spec_from_json(t));

    ModelState state;
    state.model = make_model(cfg, jm.at("head_dim").get<int>(), tasks,
                             jm.at("init_seed").get<uint64_t>());
    if (header.contains("novel")) {
        InteractionConfig icfg;
        icfg.depth = header["novel"].at("depth").get<int>();
        icfg.k = header["novel"].at("k").get<int>();
        icfg.backpack = header["novel"].at("backpack").get<std::vector<std::string>>();
        add_novel_stage(state.model, task_spec_from_json(header["novel"].at("task")), icfg);
    }
    state.epoch = header.at("epoch").get<int>();
    state.seed = header.at("seed").get<uint64_t>();
    state.opt.lr = header.at("adam").at("lr").get<double>();
    state.opt.beta1 = header.at("adam").at("beta1").get<double>();
    state.opt.beta2 = header.at("adam").at("beta2").get<double>();
    state.opt.eps = header.at("adam").at("eps").get<double>();
    state.opt.step = header.at("adam").at("step").get<long>();
    state.opt.ensure_shapes(state.model.params);

    size_t payload_size = 0;
    for (const auto& t : header.at("tensors"))
        payload_size += static_cast<size_t>(t.at("rows").get<int>()) * t.at("cols").get<int>() * 8;
    std::string payload(payload_size, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload_size));
    if (in.gcount() != static_cast<std::streamsize>(payload_size))
        throw IoError("truncated checkpoint payload: " + path.string());
    if (crc32_bytes(payload.data(), payload.size()) != header.at("crc32").get<uint32_t>())
        throw IoError("checkpoint checksum mismatch: " + path.string());

    size_t offset = 0;
    auto read_into = [&](Tensor& t, int rows, int cols, const std::string& name) {
        if (t.rows != rows || t.cols != cols)
            throw IoError("checkpoint tensor shape mismatch for " + name);
        std::memcpy(t.data.data(), payload.data() + offset, t.data.size() * 8);
        offset += t.data.size() * 8;
    };
    for (const auto& jt : header.at("tensors")) {
        const std::string name = jt.at("name").get<std::string>();
        const int rows = jt.at("rows").get<int>();
        const int cols = jt.at("cols").get<int>();
        if (name.rfind("opt/", 0) == 0) {
            const bool is_m = name.ends_with("/m");
            const std::string pname = name.substr(4, name.size() - 4 - 2);
            const int idx = state.model.params.find(pname);
            if (idx < 0) throw IoError("checkpoint optimizer state for unknown param: " + pname);
            read_into(is_m ? state.opt.m[static_cast<size_t>(idx)]
                           : state.opt.v[static_cast<size_t>(idx)],
                      rows, cols, name);
        } else {
            const int idx = state.model.params.find(name);
            if (idx < 0) throw IoError("checkpoint has unknown parameter: " + name);
            read_into(state.model.params[idx].value, rows, cols, name);
        }
    }
    return state;
}

}  // namespace egopack
