#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egopack/tensor.hpp"

namespace egopack {

struct Model;
struct SampleSet;

// Frozen per-task prototype matrix, one row per (verb, noun) pair seen in
// the AR train split. Rows are stored unnormalized as float32 (the on-disk
// payload format); cosine normalization happens at query time.
struct PrototypeBank {
    std::string task;
    int dim = 0;  // D_k
    std::vector<float> values;                // rows x dim, row-major
    std::vector<std::pair<int, int>> keys;    // row -> (verb, noun), sorted
    std::vector<int> counts;
    bool frozen = true;

    int rows() const { return static_cast<int>(keys.size()); }
    const float* row_ptr(int r) const { return values.data() + static_cast<size_t>(r) * dim; }
    int row_of(int verb, int noun) const;  // -1 when absent
    uint32_t payload_crc() const;
};

using BankMap = std::map<std::string, PrototypeBank>;

// Forwards every AR train sample through the backbone, takes the target
// node's output through each task head's MLP (no pooling), and averages the
// features per (verb, noun). Banks come back frozen.
BankMap build_banks(const Model& model, const SampleSet& ar_train, int threads = 0);

// Top-k rows by cosine similarity, descending; ties broken by lower row
// index. Throws on a zero-norm query or k outside [1, rows].
std::vector<int> knn_cosine(const double* query, int dim, const PrototypeBank& bank, int k);
std::vector<int> knn_cosine(const std::vector<double>& query, const PrototypeBank& bank, int k);

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path);
PrototypeBank load_bank(const std::filesystem::path& path);

// Total knn_cosine invocations in this process; lets tests assert that
// prototype-free paths never query the banks.
uint64_t knn_query_count();

}  // namespace egopack
