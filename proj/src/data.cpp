#include "egopack/data.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "egopack/common.hpp"
#include "egopack/rng.hpp"
#include "json.hpp"

namespace egopack {

namespace fs = std::filesystem;
using nlohmann::json;

void SyntheticConfig::validate() const {
    if (n_verbs <= 0) throw ConfigError("synthetic.n_verbs must be positive");
    if (n_nouns <= 0) throw ConfigError("synthetic.n_nouns must be positive");
    if (n_videos <= 0 || actions_per_video <= 0)
        throw ConfigError("synthetic dataset must have at least one video and action");
    if (feature_dim <= 0) throw ConfigError("synthetic.feature_dim must be positive");
    if (noise_sigma < 0.0) throw ConfigError("synthetic.noise_sigma must be >= 0");
    if (markov_temp <= 0.0) throw ConfigError("synthetic.markov_temp must be > 0");
    if (rows_per_action <= 0) throw ConfigError("synthetic.rows_per_action must be positive");
    for (int v : state_change_verbs)
        if (v < 0 || v >= n_verbs)
            throw ConfigError("synthetic.state_change_verbs entry outside [0, n_verbs)");
}

const FeatureSequence& Dataset::video(const std::string& id) const {
    auto it = video_index.find(id);
    if (it == video_index.end()) throw IoError("unknown video id: " + id);
    return videos[static_cast<size_t>(it->second)];
}

// --- feature file IO ------------------------------------------------------

namespace {

void write_f32_le(std::ofstream& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), 4);
}

float read_f32_le(std::ifstream& in) {
    uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), 4);
    if constexpr (std::endian::native == std::endian::big)
        bits = __builtin_bswap32(bits);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void write_feature_file(const fs::path& path, const Tensor& features) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open feature file for writing: " + path.string());
    out << features.rows << " " << features.cols << "\n";
    for (double v : features.data) write_f32_le(out, static_cast<float>(v));
    if (!out) throw IoError("failed writing feature file: " + path.string());
}

Tensor read_feature_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing feature file: " + path.string());
    int n = 0, d = 0;
    in >> n >> d;
    in.get();  // consume the newline after the header
    if (!in || n < 1 || d < 1) throw SchemaError("malformed feature header in " + path.string());
    Tensor t(n, d);
    for (auto& v : t.data) {
        v = static_cast<double>(read_f32_le(in));
        if (!in) throw IoError("truncated feature file: " + path.string());
    }
    if (!t.finite()) throw SchemaError("non-finite features in " + path.string());
    return t;
}

// --- synthetic generation ---------------------------------------------------

namespace {

// Row-stochastic transition matrix from seeded unit-Gaussian logits at the
// given temperature. Lower temperature concentrates successors.
std::vector<std::vector<double>> transition_matrix(int n, double temp, Rng& rng) {
    std::vector<std::vector<double>> t(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n)));
    for (auto& row : t) {
        double mx = -1e300;
        for (auto& v : row) {
            v = rng.normal() / temp;
            mx = std::max(mx, v);
        }
        double z = 0.0;
        for (auto& v : row) {
            v = std::exp(v - mx);
            z += v;
        }
        for (auto& v : row) v /= z;
    }
    return t;
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

std::string video_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%04d", i);
    return buf;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Dataset ds;

    // Class-conditional means, drawn once per (verb, noun) and then fixed.
    Rng mean_rng(mix_seed(cfg.seed, "class-means"));
    std::vector<Tensor> class_mean(static_cast<size_t>(cfg.n_verbs * cfg.n_nouns));
    for (auto& m : class_mean) {
        m = Tensor(1, cfg.feature_dim);
        for (auto& v : m.data) v = mean_rng.normal();
    }

    Rng chain_rng(mix_seed(cfg.seed, "markov-chain"));
    const auto verb_t = transition_matrix(cfg.n_verbs, cfg.markov_temp, chain_rng);
    const auto noun_t = transition_matrix(cfg.n_nouns, cfg.markov_temp, chain_rng);

    Rng sample_rng(mix_seed(cfg.seed, "samples"));
    Rng noise_rng(mix_seed(cfg.seed, "noise"));
    Rng pnr_rng(mix_seed(cfg.seed, "pnr"));

    std::vector<bool> is_state_change(static_cast<size_t>(cfg.n_verbs), false);
    for (int v : cfg.state_change_verbs) is_state_change[static_cast<size_t>(v)] = true;

    const double row_seconds = cfg.action_seconds / cfg.rows_per_action;
    for (int vid = 0; vid < cfg.n_videos; ++vid) {
        FeatureSequence seq;
        seq.video_id = video_name(vid);
        seq.features = Tensor(cfg.actions_per_video * cfg.rows_per_action, cfg.feature_dim);

        int verb = static_cast<int>(sample_rng.bounded(static_cast<uint64_t>(cfg.n_verbs)));
        int noun = static_cast<int>(sample_rng.bounded(static_cast<uint64_t>(cfg.n_nouns)));
        int row = 0;
        for (int a = 0; a < cfg.actions_per_video; ++a) {
            const double start = a * cfg.action_seconds;
            const double end = start + cfg.action_seconds;

            ActionAnnotation ann{seq.video_id, start, end, verb, noun};
            ds.actions.push_back(ann);

            ClipAnnotation clip;
            clip.video_id = seq.video_id;
            clip.start = start;
            clip.end = end;
            clip.oscc_label = is_state_change[static_cast<size_t>(verb)] ? 1 : 0;
            if (clip.oscc_label == 1)
                clip.pnr_time = start + pnr_rng.uniform01() * cfg.action_seconds;
            ds.clips.push_back(clip);

            const Tensor& mean = class_mean[static_cast<size_t>(verb * cfg.n_nouns + noun)];
            for (int r = 0; r < cfg.rows_per_action; ++r, ++row) {
                for (int c = 0; c < cfg.feature_dim; ++c)
                    seq.features.at(row, c) =
                        mean.at(0, c) + cfg.noise_sigma * noise_rng.normal();
                seq.timestamps.emplace_back(start + r * row_seconds, start + (r + 1) * row_seconds);
            }

            verb = sample_categorical(verb_t[static_cast<size_t>(verb)], sample_rng);
            noun = sample_categorical(noun_t[static_cast<size_t>(noun)], sample_rng);
        }
        ds.video_index[seq.video_id] = static_cast<int>(ds.videos.size());
        ds.videos.push_back(std::move(seq));
    }

    ds.vocab.verbs.reserve(static_cast<size_t>(cfg.n_verbs));
    for (int v = 0; v < cfg.n_verbs; ++v) ds.vocab.verbs.push_back("verb_" + std::to_string(v));
    ds.vocab.nouns.reserve(static_cast<size_t>(cfg.n_nouns));
    for (int n = 0; n < cfg.n_nouns; ++n) ds.vocab.nouns.push_back("noun_" + std::to_string(n));
    return ds;
}

// --- dataset serialization ---------------------------------------------------

void write_dataset(const Dataset& ds, const fs::path& root) {
    fs::create_directories(root / "features");
    fs::create_directories(root / "annotations");

    for (const auto& seq : ds.videos)
        write_feature_file(root / "features" / (seq.video_id + ".f32"), seq.features);

    auto write_actions = [&](const fs::path& path) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path.string());
        for (const auto& a : ds.actions) {
            json j{{"video_id", a.video_id}, {"start", a.start}, {"end", a.end},
                   {"verb", a.verb_id},     {"noun", a.noun_id}};
            out << j.dump() << "\n";
        }
    };
    // AR annotations are derived from the LTA ones, so both files carry
    // the same action records.
    write_actions(root / "annotations" / "ar.jsonl");
    write_actions(root / "annotations" / "lta.jsonl");

    {
        std::ofstream out(root / "annotations" / "oscc.jsonl");
        for (const auto& c : ds.clips) {
            json j{{"video_id", c.video_id}, {"start", c.start}, {"end", c.end}, {"oscc", c.oscc_label}};
            if (c.pnr_time) j["pnr_time"] = *c.pnr_time;
            out << j.dump() << "\n";
        }
        std::ofstream out2(root / "annotations" / "pnr.jsonl");
        for (const auto& c : ds.clips) {
            json j{{"video_id", c.video_id}, {"start", c.start}, {"end", c.end}, {"oscc", c.oscc_label}};
            if (c.pnr_time) j["pnr_time"] = *c.pnr_time;
            out2 << j.dump() << "\n";
        }
    }

    {
        json v{{"verbs", ds.vocab.verbs}, {"nouns", ds.vocab.nouns}};
        std::ofstream out(root / "vocab.json");
        out << v.dump(2) << "\n";
    }
}

namespace {

json parse_line(const std::string& line, const fs::path& path, int lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw SchemaError("invalid JSON at " + path.string() + ":" + std::to_string(lineno));
    return j;
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
    if (!fs::exists(root)) throw IoError("dataset root not found: " + root.string());
    Dataset ds;

    {
        std::ifstream in(root / "vocab.json");
        if (!in) throw IoError("missing vocab.json under " + root.string());
        json v = json::parse(in, nullptr, false);
        if (v.is_discarded()) throw SchemaError("invalid vocab.json");
        ds.vocab.verbs = v.at("verbs").get<std::vector<std::string>>();
        ds.vocab.nouns = v.at("nouns").get<std::vector<std::string>>();
    }

    auto require_video = [&](const std::string& id) {
        if (ds.video_index.count(id)) return;
        const fs::path path = root / "features" / (id + ".f32");
        if (!fs::exists(path)) throw IoError("annotation references absent video: " + id);
        FeatureSequence seq;
        seq.video_id = id;
        seq.features = read_feature_file(path);
        // Without a sidecar timestamp file the rows are assumed evenly
        // spaced; loaders fill timestamps from annotations when needed.
        ds.video_index[id] = static_cast<int>(ds.videos.size());
        ds.videos.push_back(std::move(seq));
    };

    auto load_actions = [&](const fs::path& path, std::vector<ActionAnnotation>& out) {
        std::ifstream in(path);
        if (!in) return false;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j = parse_line(line, path, lineno);
            ActionAnnotation a;
            a.video_id = j.at("video_id").get<std::string>();
            a.start = j.at("start").get<double>();
            a.end = j.at("end").get<double>();
            a.verb_id = j.at("verb").get<int>();
            a.noun_id = j.at("noun").get<int>();
            if (a.end <= a.start)
                throw SchemaError("annotation with end <= start at " + path.string() + ":" +
                                  std::to_string(lineno));
            if (a.verb_id < 0 || a.verb_id >= static_cast<int>(ds.vocab.verbs.size()) ||
                a.noun_id < 0 || a.noun_id >= static_cast<int>(ds.vocab.nouns.size()))
                throw SchemaError("label outside vocabulary at " + path.string() + ":" +
                                  std::to_string(lineno));
            require_video(a.video_id);
            out.push_back(std::move(a));
        }
        return true;
    };

    std::vector<ActionAnnotation> ar, lta;
    load_actions(root / "annotations" / "ar.jsonl", ar);
    load_actions(root / "annotations" / "lta.jsonl", lta);
    ds.actions = ar.empty() ? std::move(lta) : std::move(ar);

    auto load_clips = [&](const fs::path& path) {
        std::ifstream in(path);
        if (!in) return;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            json j = parse_line(line, path, lineno);
            ClipAnnotation c;
            c.video_id = j.at("video_id").get<std::string>();
            c.start = j.at("start").get<double>();
            c.end = j.at("end").get<double>();
            c.oscc_label = j.at("oscc").get<int>();
            if (j.contains("pnr_time")) c.pnr_time = j.at("pnr_time").get<double>();
            if (c.end <= c.start)
                throw SchemaError("clip with end <= start at " + path.string() + ":" +
                                  std::to_string(lineno));
            if (c.pnr_time && (*c.pnr_time < c.start || *c.pnr_time > c.end))
                throw SchemaError("pnr_time outside clip at " + path.string() + ":" +
                                  std::to_string(lineno));
            if (!c.pnr_time && c.oscc_label != 0)
                throw SchemaError("positive clip without pnr_time at " + path.string() + ":" +
                                  std::to_string(lineno));
            require_video(c.video_id);
            ds.clips.push_back(std::move(c));
        }
    };
    load_clips(root / "annotations" / "oscc.jsonl");

    // Width consistency across all loaded videos.
    int width = -1;
    for (const auto& seq : ds.videos) {
        if (width < 0) width = seq.features.cols;
        if (seq.features.cols != width)
            throw SchemaError("feature width mismatch: " + seq.video_id + " has " +
                              std::to_string(seq.features.cols) + ", expected " +
                              std::to_string(width));
    }

    // The feature files carry no timestamps; rows are evenly spaced over the
    // annotated duration of each video.
    std::unordered_map<std::string, double> duration;
    for (const auto& a : ds.actions)
        duration[a.video_id] = std::max(duration[a.video_id], a.end);
    for (const auto& c : ds.clips)
        duration[c.video_id] = std::max(duration[c.video_id], c.end);
    for (auto& seq : ds.videos) {
        const int n = seq.features.rows;
        double dur = 0.0;
        if (auto it = duration.find(seq.video_id); it != duration.end()) dur = it->second;
        if (dur <= 0.0) dur = static_cast<double>(n);
        seq.timestamps.clear();
        seq.timestamps.reserve(static_cast<size_t>(n));
        for (int r = 0; r < n; ++r)
            seq.timestamps.emplace_back(dur * r / n, dur * (r + 1) / n);
    }

    std::sort(ds.actions.begin(), ds.actions.end(), [](const auto& a, const auto& b) {
        return a.video_id != b.video_id ? a.video_id < b.video_id : a.start < b.start;
    });
    std::sort(ds.clips.begin(), ds.clips.end(), [](const auto& a, const auto& b) {
        return a.video_id != b.video_id ? a.video_id < b.video_id : a.start < b.start;
    });
    return ds;
}

TaskView task_view(const Dataset& ds, const std::string& task) {
    TaskView view;
    if (task == "ar" || task == "lta") {
        view.actions = ds.actions;
    } else if (task == "oscc") {
        view.clips = ds.clips;
    } else if (task == "pnr") {
        for (const auto& c : ds.clips)
            if (c.pnr_time) view.clips.push_back(c);
    } else {
        throw ConfigError("unknown task: " + task);
    }
    return view;
}

std::vector<int> video_splits(const Dataset& ds) {
    std::vector<std::string> ids;
    ids.reserve(ds.videos.size());
    for (const auto& v : ds.videos) ids.push_back(v.video_id);
    std::sort(ids.begin(), ids.end());
    std::vector<int> split(ds.videos.size(), 0);
    for (size_t rank = 0; rank < ids.size(); ++rank) {
        if (rank % 5 == 4) split[static_cast<size_t>(ds.video_index.at(ids[rank]))] = 1;
    }
    return split;
}

}  // namespace egopack
