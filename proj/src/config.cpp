#include "egopack/config.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace egopack {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) fail(path + "." + key, "unknown key");
    }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail(path + "." + key, "invalid value type");
    }
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["data"] = {{"root", data_root.string()},
                 {"synthetic",
                  {{"n_videos", synthetic.n_videos},
                   {"actions_per_video", synthetic.actions_per_video},
                   {"n_verbs", synthetic.n_verbs},
                   {"n_nouns", synthetic.n_nouns},
                   {"feature_dim", synthetic.feature_dim},
                   {"noise_sigma", synthetic.noise_sigma},
                   {"markov_temp", synthetic.markov_temp},
                   {"state_change_verbs", synthetic.state_change_verbs},
                   {"rows_per_action", synthetic.rows_per_action},
                   {"action_seconds", synthetic.action_seconds}}}};
    j["model"] = {{"layers", model.layers},
                  {"hidden_dim", model.hidden_dim},
                  {"head_dim", head_dim},
                  {"leaky_slope", model.leaky_slope},
                  {"ln_eps", model.ln_eps}};
    j["tasks"] = {{"ar", {{"window", graph.window}}},
                  {"lta", {{"observed", graph.observed}, {"anticipate", graph.anticipate}}},
                  {"oscc", {{"subsegments", graph.subsegments}}},
                  {"pnr", {{"subsegments", pnr_subsegments}}},
                  {"tau_hops", graph.tau_hops}};
    j["train"] = {{"epochs",
                   {{"ar", train.epochs_per_task.at("ar")},
                    {"lta", train.epochs_per_task.at("lta")},
                    {"oscc", train.epochs_per_task.at("oscc")},
                    {"pnr", train.epochs_per_task.at("pnr")}}},
                  {"mtl_epochs", train.mtl_epochs},
                  {"lr", train.lr},
                  {"warmup_epochs", train.warmup_epochs},
                  {"batch_size", train.batch_size},
                  {"threads", train.threads},
                  {"freeze_backbone", train.freeze_backbone}};
    j["interaction"] = {{"depth", interaction.depth}, {"k", interaction.k}};
    j["report"] = {{"out_dir", report_dir.string()}};
    return j;
}

uint32_t RunConfig::config_hash() const {
    const std::string dump = to_json().dump();
    return crc32_bytes(dump.data(), dump.size());
}

TaskSpec RunConfig::task(const std::string& name, const Vocab& vocab) const {
    GraphParams gp = graph;
    if (name == "pnr") gp.subsegments = pnr_subsegments;
    return make_task_spec(name, vocab, gp, head_dim);
}

RunConfig parse_config(const json& doc) {
    RunConfig cfg;
    check_keys(doc, "config", {"seed", "data", "model", "tasks", "train", "interaction", "report"});
    read(doc, "config", "seed", cfg.seed);

    if (doc.contains("data")) {
        const json& d = doc["data"];
        check_keys(d, "data", {"root", "synthetic"});
        std::string root = cfg.data_root.string();
        read(d, "data", "root", root);
        cfg.data_root = root;
        if (d.contains("synthetic")) {
            const json& s = d["synthetic"];
            check_keys(s, "data.synthetic",
                       {"n_videos", "actions_per_video", "n_verbs", "n_nouns", "feature_dim",
                        "noise_sigma", "markov_temp", "state_change_verbs", "rows_per_action",
                        "action_seconds"});
            read(s, "data.synthetic", "n_videos", cfg.synthetic.n_videos);
            read(s, "data.synthetic", "actions_per_video", cfg.synthetic.actions_per_video);
            read(s, "data.synthetic", "n_verbs", cfg.synthetic.n_verbs);
            read(s, "data.synthetic", "n_nouns", cfg.synthetic.n_nouns);
            read(s, "data.synthetic", "feature_dim", cfg.synthetic.feature_dim);
            read(s, "data.synthetic", "noise_sigma", cfg.synthetic.noise_sigma);
            read(s, "data.synthetic", "markov_temp", cfg.synthetic.markov_temp);
            read(s, "data.synthetic", "state_change_verbs", cfg.synthetic.state_change_verbs);
            read(s, "data.synthetic", "rows_per_action", cfg.synthetic.rows_per_action);
            read(s, "data.synthetic", "action_seconds", cfg.synthetic.action_seconds);
        }
    }

    if (doc.contains("model")) {
        const json& m = doc["model"];
        check_keys(m, "model", {"layers", "hidden_dim", "head_dim", "leaky_slope", "ln_eps"});
        read(m, "model", "layers", cfg.model.layers);
        read(m, "model", "hidden_dim", cfg.model.hidden_dim);
        read(m, "model", "head_dim", cfg.head_dim);
        read(m, "model", "leaky_slope", cfg.model.leaky_slope);
        read(m, "model", "ln_eps", cfg.model.ln_eps);
    }

    if (doc.contains("tasks")) {
        const json& t = doc["tasks"];
        check_keys(t, "tasks", {"ar", "lta", "oscc", "pnr", "tau_hops"});
        read(t, "tasks", "tau_hops", cfg.graph.tau_hops);
        if (t.contains("ar")) {
            check_keys(t["ar"], "tasks.ar", {"window"});
            read(t["ar"], "tasks.ar", "window", cfg.graph.window);
        }
        if (t.contains("lta")) {
            check_keys(t["lta"], "tasks.lta", {"observed", "anticipate"});
            read(t["lta"], "tasks.lta", "observed", cfg.graph.observed);
            read(t["lta"], "tasks.lta", "anticipate", cfg.graph.anticipate);
        }
        if (t.contains("oscc")) {
            check_keys(t["oscc"], "tasks.oscc", {"subsegments"});
            read(t["oscc"], "tasks.oscc", "subsegments", cfg.graph.subsegments);
        }
        if (t.contains("pnr")) {
            check_keys(t["pnr"], "tasks.pnr", {"subsegments"});
            read(t["pnr"], "tasks.pnr", "subsegments", cfg.pnr_subsegments);
        }
    }

    if (doc.contains("train")) {
        const json& tr = doc["train"];
        check_keys(tr, "train",
                   {"epochs", "mtl_epochs", "lr", "warmup_epochs", "batch_size", "threads",
                    "freeze_backbone"});
        if (tr.contains("epochs")) {
            check_keys(tr["epochs"], "train.epochs", {"ar", "lta", "oscc", "pnr"});
            for (const char* task : {"ar", "lta", "oscc", "pnr"})
                read(tr["epochs"], "train.epochs", task, cfg.train.epochs_per_task[task]);
        }
        read(tr, "train", "mtl_epochs", cfg.train.mtl_epochs);
        read(tr, "train", "lr", cfg.train.lr);
        read(tr, "train", "warmup_epochs", cfg.train.warmup_epochs);
        read(tr, "train", "batch_size", cfg.train.batch_size);
        read(tr, "train", "threads", cfg.train.threads);
        read(tr, "train", "freeze_backbone", cfg.train.freeze_backbone);
    }

    if (doc.contains("interaction")) {
        const json& ix = doc["interaction"];
        check_keys(ix, "interaction", {"depth", "k"});
        read(ix, "interaction", "depth", cfg.interaction.depth);
        read(ix, "interaction", "k", cfg.interaction.k);
    }

    if (doc.contains("report")) {
        const json& r = doc["report"];
        check_keys(r, "report", {"out_dir"});
        std::string dir = cfg.report_dir.string();
        read(r, "report", "out_dir", dir);
        cfg.report_dir = dir;
    }

    cfg.synthetic.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.synthetic.validate();
    cfg.model.input_dim = cfg.synthetic.feature_dim;
    cfg.model.validate();
    cfg.train.validate();
    if (cfg.interaction.depth < 1) fail("interaction.depth", "must be >= 1");
    if (cfg.interaction.k < 0) fail("interaction.k", "must be >= 0");
    if (cfg.graph.window < 1 || cfg.graph.window % 2 == 0) fail("tasks.ar.window", "must be odd and positive");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("missing config file: " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path.string() + ": invalid JSON");
    return parse_config(doc);
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must look like a.b=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    json* node = &doc;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) throw ConfigError("empty key in override path: " + path);
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* s = std::getenv("EGOPACK_SEED")) {
        cfg.seed = std::strtoull(s, nullptr, 10);
        cfg.synthetic.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
    }
}

std::string git_describe() {
    FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    char buf[128] = {0};
    std::string out;
    while (fgets(buf, sizeof(buf), pipe)) out += buf;
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

void write_manifest(const std::filesystem::path& run_dir, const std::string& command,
                    const RunConfig& cfg, const json& extra) {
    std::filesystem::create_directories(run_dir);
    json manifest;
    manifest["command"] = command;
    manifest["config"] = cfg.to_json();
    manifest["config_crc32"] = cfg.config_hash();
    manifest["seed"] = cfg.seed;
    manifest["git"] = git_describe();
    const auto now = std::chrono::system_clock::now();
    manifest["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    for (const auto& [k, v] : extra.items()) manifest[k] = v;
    std::ofstream out(run_dir / "run.json");
    if (!out) throw IoError("cannot write manifest under " + run_dir.string());
    out << manifest.dump(2) << "\n";
}

}  // namespace egopack
