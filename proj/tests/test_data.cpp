#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "egopack/data.hpp"
#include "json.hpp"

using namespace egopack;
namespace fs = std::filesystem;

namespace {

SyntheticConfig tiny_config() {
    SyntheticConfig cfg;
    cfg.n_videos = 4;
    cfg.actions_per_video = 6;
    cfg.n_verbs = 4;
    cfg.n_nouns = 5;
    cfg.feature_dim = 8;
    cfg.noise_sigma = 0.5;
    cfg.state_change_verbs = {0, 1};
    cfg.seed = 11;
    return cfg;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("egopack_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("synthetic: zero noise gives identical features per (verb, noun)") {
    SyntheticConfig cfg = tiny_config();
    cfg.noise_sigma = 0.0;
    const Dataset ds = generate_synthetic(cfg);

    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> where;  // class -> (video,row)
    for (const auto& a : ds.actions) {
        const int vid = ds.video_index.at(a.video_id);
        int row = 0;
        const auto& seq = ds.videos[static_cast<size_t>(vid)];
        for (int r = 0; r < seq.features.rows; ++r) {
            const double mid = 0.5 * (seq.timestamps[static_cast<size_t>(r)].first +
                                      seq.timestamps[static_cast<size_t>(r)].second);
            if (mid >= a.start && mid < a.end) {
                row = r;
                break;
            }
        }
        where[{a.verb_id, a.noun_id}].emplace_back(vid, row);
    }
    for (const auto& [cls, rows] : where) {
        if (rows.size() < 2) continue;
        const auto& [v0, r0] = rows[0];
        for (size_t i = 1; i < rows.size(); ++i) {
            const auto& [vi, ri] = rows[i];
            for (int c = 0; c < 8; ++c)
                CHECK(ds.videos[static_cast<size_t>(v0)].features.at(r0, c) ==
                      ds.videos[static_cast<size_t>(vi)].features.at(ri, c));
        }
    }
}

TEST_CASE("synthetic: same seed twice is byte-identical on disk") {
    const fs::path a = temp_dir("gen_a");
    const fs::path b = temp_dir("gen_b");
    write_dataset(generate_synthetic(tiny_config()), a);
    write_dataset(generate_synthetic(tiny_config()), b);
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        CHECK(slurp(entry.path()) == slurp(b / rel));
    }
    // A different seed changes the bytes.
    SyntheticConfig other = tiny_config();
    other.seed = 12;
    const fs::path c = temp_dir("gen_c");
    write_dataset(generate_synthetic(other), c);
    CHECK(slurp(a / "features" / "synth_0000.f32") != slurp(c / "features" / "synth_0000.f32"));
}

TEST_CASE("synthetic: oscc label is exactly the state-change-verb membership test") {
    SyntheticConfig cfg = tiny_config();
    const Dataset ds = generate_synthetic(cfg);
    REQUIRE(ds.clips.size() == ds.actions.size());
    for (size_t i = 0; i < ds.clips.size(); ++i) {
        const bool sc = ds.actions[i].verb_id == 0 || ds.actions[i].verb_id == 1;
        CHECK(ds.clips[i].oscc_label == (sc ? 1 : 0));
        if (ds.clips[i].oscc_label == 1) {
            REQUIRE(ds.clips[i].pnr_time.has_value());
            CHECK(*ds.clips[i].pnr_time >= ds.clips[i].start);
            CHECK(*ds.clips[i].pnr_time <= ds.clips[i].end);
        } else {
            CHECK(!ds.clips[i].pnr_time.has_value());
        }
    }
}

TEST_CASE("synthetic: chain forced to a state-change verb labels every clip positive") {
    SyntheticConfig cfg = tiny_config();
    cfg.n_verbs = 1;
    cfg.state_change_verbs = {0};
    const Dataset ds = generate_synthetic(cfg);
    for (const auto& c : ds.clips) CHECK(c.oscc_label == 1);
}

TEST_CASE("synthetic: degenerate vocabulary rejected") {
    SyntheticConfig cfg = tiny_config();
    cfg.n_verbs = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = tiny_config();
    cfg.state_change_verbs = {99};
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

TEST_CASE("dataset round trip preserves features and annotations") {
    const fs::path root = temp_dir("roundtrip");
    const Dataset ds = generate_synthetic(tiny_config());
    write_dataset(ds, root);
    const Dataset loaded = load_dataset(root);
    CHECK(loaded.videos.size() == ds.videos.size());
    CHECK(loaded.actions.size() == ds.actions.size());
    CHECK(loaded.clips.size() == ds.clips.size());
    CHECK(loaded.vocab.verbs == ds.vocab.verbs);
    // float32 quantization is the only loss permitted.
    const auto& a = ds.videos[0].features;
    const auto& b = loaded.video(ds.videos[0].video_id).features;
    CHECK(max_abs_diff(a, b) < 1e-6);
}

TEST_CASE("loader: hand-written fixture resolves 3 videos and 12 annotations") {
    const fs::path root = temp_dir("fixture");
    fs::create_directories(root / "features");
    fs::create_directories(root / "annotations");
    {
        nlohmann::json v{{"verbs", {"a", "b"}}, {"nouns", {"x", "y", "z"}}};
        std::ofstream out(root / "vocab.json");
        out << v.dump();
    }
    for (const std::string id : {"vid_a", "vid_b", "vid_c"}) {
        Tensor f(8, 4);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 4; ++c) f.at(r, c) = r + c;
        write_feature_file(root / "features" / (id + ".f32"), f);
    }
    {
        std::ofstream out(root / "annotations" / "ar.jsonl");
        int i = 0;
        for (const std::string id : {"vid_a", "vid_b", "vid_c"})
            for (int a = 0; a < 4; ++a, ++i)
                out << nlohmann::json{{"video_id", id}, {"start", a * 2.0}, {"end", (a + 1) * 2.0},
                                      {"verb", i % 2},  {"noun", i % 3}}
                           .dump()
                    << "\n";
    }
    const Dataset ds = load_dataset(root);
    CHECK(ds.videos.size() == 3);
    CHECK(ds.actions.size() == 12);
    for (const auto& a : ds.actions) CHECK(ds.video_index.count(a.video_id) == 1);

    const TaskView ar = task_view(ds, "ar");
    CHECK(ar.actions.size() == 12);
}

TEST_CASE("loader: empty annotation index loads an empty dataset") {
    const fs::path root = temp_dir("empty");
    fs::create_directories(root / "annotations");
    {
        nlohmann::json v{{"verbs", {"a"}}, {"nouns", {"x"}}};
        std::ofstream out(root / "vocab.json");
        out << v.dump();
    }
    std::ofstream(root / "annotations" / "ar.jsonl");
    const Dataset ds = load_dataset(root);
    CHECK(ds.videos.empty());
    CHECK(ds.actions.empty());
}

TEST_CASE("loader: annotation referencing an absent video names the id") {
    const fs::path root = temp_dir("absent");
    fs::create_directories(root / "annotations");
    {
        nlohmann::json v{{"verbs", {"a"}}, {"nouns", {"x"}}};
        std::ofstream out(root / "vocab.json");
        out << v.dump();
    }
    {
        std::ofstream out(root / "annotations" / "ar.jsonl");
        out << nlohmann::json{{"video_id", "ghost"}, {"start", 0.0}, {"end", 1.0}, {"verb", 0}, {"noun", 0}}
                   .dump()
            << "\n";
    }
    try {
        load_dataset(root);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
    }
}

TEST_CASE("loader: width mismatch across videos is a schema error") {
    const fs::path root = temp_dir("width");
    fs::create_directories(root / "features");
    fs::create_directories(root / "annotations");
    {
        nlohmann::json v{{"verbs", {"a"}}, {"nouns", {"x"}}};
        std::ofstream out(root / "vocab.json");
        out << v.dump();
    }
    write_feature_file(root / "features" / "v1.f32", Tensor(4, 3, 1.0));
    write_feature_file(root / "features" / "v2.f32", Tensor(4, 5, 1.0));
    {
        std::ofstream out(root / "annotations" / "ar.jsonl");
        for (const std::string id : {"v1", "v2"})
            out << nlohmann::json{{"video_id", id}, {"start", 0.0}, {"end", 1.0}, {"verb", 0}, {"noun", 0}}
                       .dump()
                << "\n";
    }
    CHECK_THROWS_AS(load_dataset(root), SchemaError);
}

TEST_CASE("feature file header + payload round trip; truncation detected") {
    const fs::path root = temp_dir("f32");
    Tensor f(3, 2);
    for (size_t i = 0; i < f.size(); ++i) f.data[i] = 0.25 * static_cast<double>(i);
    write_feature_file(root / "x.f32", f);
    const Tensor g = read_feature_file(root / "x.f32");
    CHECK(g.rows == 3);
    CHECK(g.cols == 2);
    CHECK(max_abs_diff(f, g) == 0.0);

    auto bytes = slurp(root / "x.f32");
    std::ofstream out(root / "trunc.f32", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    out.close();
    CHECK_THROWS_AS(read_feature_file(root / "trunc.f32"), IoError);
}

TEST_CASE("video splits: deterministic 80/20 by sorted rank") {
    const Dataset ds = generate_synthetic(tiny_config());  // 4 videos -> no val until rank 4
    const auto split = video_splits(ds);
    CHECK(split.size() == 4);
    SyntheticConfig cfg = tiny_config();
    cfg.n_videos = 10;
    const Dataset big = generate_synthetic(cfg);
    const auto split10 = video_splits(big);
    int val = 0;
    for (int s : split10) val += s;
    CHECK(val == 2);
    CHECK(video_splits(big) == split10);
}
