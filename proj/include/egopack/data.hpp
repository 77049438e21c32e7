#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "egopack/tensor.hpp"

namespace egopack {

// Ordered per-segment feature vectors for one video.
struct FeatureSequence {
    std::string video_id;
    Tensor features;                                   // N x D
    std::vector<std::pair<double, double>> timestamps;  // start/end seconds per row
};

struct ActionAnnotation {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    int verb_id = 0;
    int noun_id = 0;
};

struct ClipAnnotation {
    std::string video_id;
    double start = 0.0;
    double end = 0.0;
    int oscc_label = 0;
    std::optional<double> pnr_time;
};

struct Vocab {
    std::vector<std::string> verbs;
    std::vector<std::string> nouns;
};

struct SyntheticConfig {
    int n_videos = 200;
    int actions_per_video = 24;
    int n_verbs = 12;
    int n_nouns = 20;
    int feature_dim = 64;
    double noise_sigma = 1.0;
    double markov_temp = 0.5;
    std::vector<int> state_change_verbs = {0, 1, 2, 3, 4, 5};
    uint64_t seed = 7;
    int rows_per_action = 16;
    double action_seconds = 8.0;

    void validate() const;
};

struct Dataset {
    std::vector<FeatureSequence> videos;
    std::unordered_map<std::string, int> video_index;  // video_id -> videos index
    std::vector<ActionAnnotation> actions;             // sorted by (video, start)
    std::vector<ClipAnnotation> clips;
    Vocab vocab;

    const FeatureSequence& video(const std::string& id) const;
};

// Draws (verb, noun) actions from a seeded Markov chain, with features equal
// to a fixed class-conditional mean plus Gaussian noise. Deterministic for a
// fixed seed; regeneration is byte-identical.
Dataset generate_synthetic(const SyntheticConfig& cfg);

void write_dataset(const Dataset& ds, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

// Per-task view: "ar"/"lta" resolve action annotations, "oscc"/"pnr" clips.
// Every annotation's video_id is checked against the loaded sequences.
struct TaskView {
    std::vector<ActionAnnotation> actions;
    std::vector<ClipAnnotation> clips;
};
TaskView task_view(const Dataset& ds, const std::string& task);

// Deterministic 80/20 split by rank of the sorted video ids: every fifth
// video is validation. Returns 0 = train, 1 = val per videos[] index.
std::vector<int> video_splits(const Dataset& ds);

// Feature file IO (header "N D\n" + N*D little-endian float32).
void write_feature_file(const std::filesystem::path& path, const Tensor& features);
Tensor read_feature_file(const std::filesystem::path& path);

}  // namespace egopack
