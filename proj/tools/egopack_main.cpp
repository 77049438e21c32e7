#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "egopack/config.hpp"
#include "egopack/metrics.hpp"
#include "egopack/report.hpp"
#include "egopack/training.hpp"

namespace fs = std::filesystem;
using namespace egopack;
using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("missing config file: " + config_path);
        doc = json::parse(in, nullptr, false);
        if (doc.is_discarded()) throw ConfigError(config_path + ": invalid JSON");
    }
    for (const auto& o : overrides) apply_override(doc, o);
    RunConfig cfg = parse_config(doc);
    apply_env_overrides(cfg);
    return cfg;
}

Dataset load_data(const RunConfig& cfg) { return load_dataset(cfg.data_root); }

EpochSink log_sink(const fs::path& run_dir, json& last_metrics) {
    fs::create_directories(run_dir);
    auto log = std::make_shared<std::ofstream>(run_dir / "train_log.jsonl");
    return [log, &last_metrics](const EpochMetrics& em) {
        json j;
        j["epoch"] = em.epoch;
        for (const auto& [task, loss] : em.task_loss) j["loss"][task] = loss;
        j["total"] = em.total_loss;
        (*log) << j.dump() << "\n";
        log->flush();
        last_metrics = j;
        std::cout << "epoch " << em.epoch << " total_loss " << em.total_loss << "\n";
    };
}

json eval_metrics_json(const EvalOutput& eval) {
    json j;
    for (const auto& [k, v] : eval.metrics) j[k] = v;
    return j;
}

json bank_keys_json(const BankMap& banks) {
    json j;
    for (const auto& [task, bank] : banks) {
        json keys = json::array();
        for (auto [v, n] : bank.keys) keys.push_back({v, n});
        j[task] = std::move(keys);
    }
    return j;
}

BankMap load_banks_dir(const fs::path& dir) {
    if (!fs::exists(dir)) throw IoError("missing banks directory: " + dir.string());
    BankMap banks;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".bank") continue;
        PrototypeBank bank = load_bank(entry.path());
        banks.emplace(bank.task, std::move(bank));
    }
    if (banks.empty()) throw IoError("no .bank files under " + dir.string());
    return banks;
}

double primary_metric(const std::string& task, const std::map<std::string, double>& m) {
    if (task == "ar") return 0.5 * (m.at("verb_top1") + m.at("noun_top1"));
    if (task == "lta") return 1.0 - 0.5 * (m.at("verb_ed") + m.at("noun_ed"));
    if (task == "oscc") return m.at("accuracy");
    return 1.0 - std::min(m.at("loc_err_s"), 1.0);
}

int run(int argc, char** argv) {
    CLI::App app{"EgoPack-style temporal-graph multi-task training and cross-task transfer"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "config JSON file")->each([](const std::string&) {});
    app.add_option("--set", overrides, "config override a.b.c=value (repeatable)");

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "generate the synthetic dataset");
    std::string gen_out;
    gen->add_option("--out", gen_out, "output dataset root (defaults to data.root)");

    // train-mtl
    auto* mtl = app.add_subcommand("train-mtl", "multi-task pretraining (or single-task training)");
    std::string mtl_tasks = "ar,lta,oscc,pnr";
    std::string mtl_out = "runs/mtl";
    std::string mtl_resume;
    mtl->add_option("--tasks", mtl_tasks, "comma-separated task subset");
    mtl->add_option("--out", mtl_out, "run directory");
    mtl->add_option("--resume", mtl_resume, "checkpoint to resume from");

    // build-prototypes
    auto* proto = app.add_subcommand("build-prototypes", "freeze per-task prototype banks");
    std::string proto_ckpt, proto_out = "runs/banks";
    proto->add_option("--ckpt", proto_ckpt, "MTL checkpoint")->required();
    proto->add_option("--out", proto_out, "bank output directory");

    // train-novel
    auto* novel = app.add_subcommand("train-novel", "novel-task training with the backpack");
    std::string novel_ckpt, novel_banks, novel_task, novel_out = "runs/novel";
    int novel_k = -1, novel_depth = -1;
    std::string novel_backpack;
    novel->add_option("--ckpt", novel_ckpt, "MTL checkpoint")->required();
    novel->add_option("--banks", novel_banks, "prototype bank directory");
    novel->add_option("--novel-task", novel_task, "task to learn")->required();
    novel->add_option("--tasks-in-backpack", novel_backpack,
                      "backpack tasks (default: all checkpoint tasks)");
    novel->add_option("--k", novel_k, "neighbors per interaction layer (0 disables)");
    novel->add_option("--depth", novel_depth, "interaction layers");
    novel->add_option("--out", novel_out, "run directory");

    // train-baseline
    auto* base = app.add_subcommand("train-baseline", "mlp / single-task / mtl-ft baselines");
    std::string base_kind, base_task, base_ckpt, base_out = "runs/baseline";
    base->add_option("--kind", base_kind, "mlp | single-task | mtl-ft")->required();
    base->add_option("--task", base_task, "task")->required();
    base->add_option("--ckpt", base_ckpt, "MTL checkpoint (mtl-ft only)");
    base->add_option("--out", base_out, "run directory");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on one task");
    std::string ev_ckpt, ev_banks, ev_task, ev_split = "val", ev_out = "runs/eval";
    ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
    ev->add_option("--banks", ev_banks, "prototype banks (novel checkpoints)");
    ev->add_option("--task", ev_task, "task")->required();
    ev->add_option("--split", ev_split, "train | val");
    ev->add_option("--out", ev_out, "run directory");

    // report
    auto* rep = app.add_subcommand("report", "build metrics/figures from run directories");
    std::vector<std::string> rep_runs;
    std::string rep_out;
    rep->add_option("--runs", rep_runs, "run directories")->required();
    rep->add_option("--out", rep_out, "report directory (defaults to report.out_dir)");

    // sweep
    auto* sw = app.add_subcommand("sweep", "grid over interaction k or depth");
    std::string sw_param, sw_values, sw_ckpt, sw_banks, sw_task, sw_out = "runs/sweep";
    sw->add_option("--param", sw_param, "k | depth")->required();
    sw->add_option("--values", sw_values, "comma-separated values")->required();
    sw->add_option("--ckpt", sw_ckpt, "MTL checkpoint")->required();
    sw->add_option("--banks", sw_banks, "prototype banks")->required();
    sw->add_option("--novel-task", sw_task, "novel task")->required();
    sw->add_option("--out", sw_out, "sweep directory");

    // dump-graph
    auto* dump = app.add_subcommand("dump-graph", "write one task sample as debug JSON");
    std::string dump_task, dump_split = "train", dump_out = "graph.json";
    int dump_index = 0;
    dump->add_option("--task", dump_task, "task")->required();
    dump->add_option("--split", dump_split, "train | val");
    dump->add_option("--index", dump_index, "sample index");
    dump->add_option("--out", dump_out, "output JSON file");

    CLI11_PARSE(app, argc, argv);

    RunConfig cfg = resolve_config(config_path, overrides);
    const int split_of = 0;
    (void)split_of;

    if (gen->parsed()) {
        const fs::path out = gen_out.empty() ? cfg.data_root : fs::path(gen_out);
        Dataset ds = generate_synthetic(cfg.synthetic);
        write_dataset(ds, out);
        json extra;
        extra["metrics"] = {{"videos", ds.videos.size()},
                            {"actions", ds.actions.size()},
                            {"clips", ds.clips.size()}};
        write_manifest(out, "generate-data", cfg, extra);
        std::cout << "wrote " << ds.videos.size() << " videos under " << out << "\n";
        return 0;
    }

    if (mtl->parsed()) {
        Dataset ds = load_data(cfg);
        std::vector<TaskSpec> specs;
        for (const auto& name : split_list(mtl_tasks)) specs.push_back(cfg.task(name, ds.vocab));
        if (specs.empty()) throw ConfigError("train-mtl: --tasks resolved to an empty set");
        json last;
        const EpochSink sink = log_sink(mtl_out, last);
        ModelState resume_state;
        const ModelState* resume = nullptr;
        if (!mtl_resume.empty()) {
            resume_state = load_checkpoint(mtl_resume);
            resume = &resume_state;
        }
        ModelState state = train_mtl(specs, ds, cfg.model, cfg.head_dim, cfg.train, sink, resume);
        save_checkpoint(state, fs::path(mtl_out) / "ckpt.bin");
        write_manifest(mtl_out, "train-mtl", cfg, json{{"metrics", last}, {"tasks", split_list(mtl_tasks)}});
        std::cout << "checkpoint: " << (fs::path(mtl_out) / "ckpt.bin") << "\n";
        return 0;
    }

    if (proto->parsed()) {
        Dataset ds = load_data(cfg);
        ModelState state = load_checkpoint(proto_ckpt);
        const SampleSet ar_train = build_samples(ds, cfg.task("ar", ds.vocab), 0);
        BankMap banks = build_banks(state.model, ar_train, cfg.train.threads);
        fs::create_directories(proto_out);
        for (const auto& [task, bank] : banks)
            save_bank(bank, fs::path(proto_out) / (task + ".bank"));
        json extra;
        extra["metrics"] = {{"banks", banks.size()},
                            {"rows", banks.begin()->second.rows()}};
        write_manifest(proto_out, "build-prototypes", cfg, extra);
        std::cout << "wrote " << banks.size() << " banks under " << proto_out << "\n";
        return 0;
    }

    auto run_novel = [&](const std::string& ckpt_path, const std::string& banks_path,
                         const std::string& task_name, int k, int depth,
                         const std::string& backpack_csv, const fs::path& out_dir) {
        Dataset ds = load_data(cfg);
        ModelState mtl_state = load_checkpoint(ckpt_path);
        InteractionConfig icfg = cfg.interaction;
        if (k >= 0) icfg.k = k;
        if (depth >= 1) icfg.depth = depth;
        if (!backpack_csv.empty()) {
            icfg.backpack = split_list(backpack_csv);
        } else {
            for (const auto& t : mtl_state.model.tasks)
                if (t.name != task_name) icfg.backpack.push_back(t.name);
        }
        BankMap banks;
        if (icfg.k > 0) banks = load_banks_dir(banks_path);
        const TaskSpec novel_spec = cfg.task(task_name, ds.vocab);
        json last;
        const EpochSink sink = log_sink(out_dir, last);
        ModelState state = train_novel(mtl_state, banks, novel_spec, ds, cfg.train, icfg, sink);
        save_checkpoint(state, out_dir / "ckpt.bin");

        // Validation eval for the manifest (and the sweep summary).
        const SampleSet val = build_samples(ds, novel_spec, 1);
        const EvalOutput eval = evaluate(state.model, icfg.k > 0 ? &banks : nullptr, novel_spec,
                                         val, cfg.train.threads);
        write_prediction_log(out_dir, task_name, eval);
        json extra;
        extra["metrics"] = eval_metrics_json(eval);
        extra["train"] = last;
        extra["interaction"] = {{"k", icfg.k}, {"depth", icfg.depth}, {"backpack", icfg.backpack}};
        if (icfg.k > 0) extra["bank_keys"] = bank_keys_json(banks);
        write_manifest(out_dir, "train-novel", cfg, extra);
        return eval;
    };

    if (novel->parsed()) {
        const EvalOutput eval =
            run_novel(novel_ckpt, novel_banks, novel_task, novel_k, novel_depth, novel_backpack,
                      novel_out);
        for (const auto& [k, v] : eval.metrics) std::cout << novel_task << " " << k << " " << v << "\n";
        return 0;
    }

    if (base->parsed()) {
        Dataset ds = load_data(cfg);
        const TaskSpec spec = cfg.task(base_task, ds.vocab);
        json last;
        const EpochSink sink = log_sink(base_out, last);
        ModelState state;
        if (base_kind == "mlp") {
            state = train_mtl({spec}, ds, cfg.model, cfg.head_dim, cfg.train, sink, nullptr,
                              /*strip_edges=*/true);
        } else if (base_kind == "single-task") {
            state = train_mtl({spec}, ds, cfg.model, cfg.head_dim, cfg.train, sink);
        } else if (base_kind == "mtl-ft") {
            if (base_ckpt.empty()) throw ConfigError("train-baseline mtl-ft requires --ckpt");
            ModelState mtl_state = load_checkpoint(base_ckpt);
            state = train_mtl_ft(mtl_state, spec, ds, cfg.train, sink);
        } else {
            throw ConfigError("unknown baseline kind: " + base_kind);
        }
        save_checkpoint(state, fs::path(base_out) / "ckpt.bin");
        const SampleSet val = build_samples(ds, spec, 1, base_kind == "mlp");
        const EvalOutput eval = evaluate(state.model, nullptr, spec, val, cfg.train.threads);
        write_prediction_log(base_out, base_task, eval);
        write_manifest(base_out, "train-baseline", cfg,
                       json{{"metrics", eval_metrics_json(eval)}, {"kind", base_kind}, {"train", last}});
        for (const auto& [k, v] : eval.metrics) std::cout << base_task << " " << k << " " << v << "\n";
        return 0;
    }

    if (ev->parsed()) {
        Dataset ds = load_data(cfg);
        ModelState state = load_checkpoint(ev_ckpt);
        const TaskSpec spec = cfg.task(ev_task, ds.vocab);
        const int split = ev_split == "train" ? 0 : 1;
        if (ev_split != "train" && ev_split != "val")
            throw ConfigError("eval --split must be train or val");
        BankMap banks;
        const BankMap* banks_ptr = nullptr;
        if (!ev_banks.empty()) {
            banks = load_banks_dir(ev_banks);
            banks_ptr = &banks;
        }
        const SampleSet samples = build_samples(ds, spec, split);
        const EvalOutput eval = evaluate(state.model, banks_ptr, spec, samples, cfg.train.threads);
        write_prediction_log(ev_out, ev_task, eval);
        json extra;
        extra["metrics"] = eval_metrics_json(eval);
        extra["split"] = ev_split;
        if (banks_ptr != nullptr) extra["bank_keys"] = bank_keys_json(banks);
        write_manifest(ev_out, "eval", cfg, extra);
        for (const auto& [k, v] : eval.metrics) std::cout << ev_task << " " << k << " " << v << "\n";
        return 0;
    }

    if (rep->parsed()) {
        const fs::path out = rep_out.empty() ? cfg.report_dir : fs::path(rep_out);
        std::vector<fs::path> dirs;
        for (const auto& r : rep_runs) dirs.emplace_back(r);
        build_report(dirs, out);
        write_manifest(out, "report", cfg, json{{"runs", rep_runs}});
        std::cout << "report written to " << out << "\n";
        return 0;
    }

    if (sw->parsed()) {
        if (sw_param != "k" && sw_param != "depth")
            throw ConfigError("sweep --param must be k or depth");
        std::vector<int> values;
        for (const auto& v : split_list(sw_values)) values.push_back(std::stoi(v));
        if (values.empty()) throw ConfigError("sweep --values is empty");
        fs::create_directories(sw_out);
        std::vector<std::vector<std::string>> rows;
        std::vector<double> xs, ys;
        for (int v : values) {
            const fs::path point_dir = fs::path(sw_out) / (sw_param + "_" + std::to_string(v));
            const int k = sw_param == "k" ? v : -1;
            const int depth = sw_param == "depth" ? v : -1;
            const EvalOutput eval = run_novel(sw_ckpt, sw_banks, sw_task, k, depth, "", point_dir);
            const double score = primary_metric(sw_task, eval.metrics);
            rows.push_back({std::to_string(v), std::to_string(score)});
            xs.push_back(v);
            ys.push_back(score);
            std::cout << sw_param << "=" << v << " score " << score << "\n";
        }
        write_csv(fs::path(sw_out) / "summary.csv", {sw_param, "score"}, rows);
        svg_line_chart(fs::path(sw_out) / "summary.svg", sw_task + " vs " + sw_param, xs, ys,
                       sw_param, "score");
        write_manifest(sw_out, "sweep", cfg,
                       json{{"param", sw_param}, {"values", values}, {"task", sw_task}});
        return 0;
    }

    if (dump->parsed()) {
        Dataset ds = load_data(cfg);
        const TaskSpec spec = cfg.task(dump_task, ds.vocab);
        const int split = dump_split == "train" ? 0 : 1;
        const SampleSet samples = build_samples(ds, spec, split);
        if (dump_index < 0 || dump_index >= static_cast<int>(samples.samples.size()))
            throw ConfigError("dump-graph: index out of range");
        std::ofstream out(dump_out);
        if (!out) throw IoError("cannot write " + dump_out);
        out << graph_to_json(samples.samples[static_cast<size_t>(dump_index)].graph) << "\n";
        std::cout << "graph written to " << dump_out << "\n";
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << json{{"error", e.what()}, {"code", 2}}.dump() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << json{{"error", e.what()}, {"code", 3}}.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"code", 1}}.dump() << "\n";
        return 1;
    }
}
