#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "egopack/backbone.hpp"
#include "egopack/data.hpp"
#include "egopack/graph.hpp"
#include "egopack/interaction.hpp"
#include "egopack/training.hpp"
#include "json.hpp"

namespace egopack {

// Run configuration document. Unknown keys are rejected with the offending
// field path; overrides use --set a.b.c=value.
struct RunConfig {
    uint64_t seed = 7;
    std::filesystem::path data_root = "data/synth";
    SyntheticConfig synthetic;
    BackboneConfig model;
    int head_dim = 64;
    GraphParams graph;        // per-task graph params share tau_hops
    int pnr_subsegments = 16;  // graph.subsegments covers oscc
    TrainConfig train;
    InteractionConfig interaction;
    std::filesystem::path report_dir = "report";

    nlohmann::json to_json() const;
    uint32_t config_hash() const;

    TaskSpec task(const std::string& name, const Vocab& vocab) const;
};

RunConfig default_config();

// Parses and validates a config document; `source` names the file for error
// messages. Throws ConfigError with the field path on any violation.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

// Applies one "a.b.c=value" override onto the JSON document (value parsed as
// JSON when possible, else kept as a string).
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Environment override: EGOPACK_SEED replaces the config seed when set.
void apply_env_overrides(RunConfig& cfg);

// Per-run manifest (run.json): command, resolved config + hash, seed,
// git describe, and final metrics.
void write_manifest(const std::filesystem::path& run_dir, const std::string& command,
                    const RunConfig& cfg, const nlohmann::json& extra);

std::string git_describe();

}  // namespace egopack
