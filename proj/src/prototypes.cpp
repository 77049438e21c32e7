#include "egopack/prototypes.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>

#include "egopack/common.hpp"
#include "egopack/model.hpp"
#include "json.hpp"

namespace egopack {

namespace {
std::atomic<uint64_t> g_knn_queries{0};
}

uint64_t knn_query_count() { return g_knn_queries.load(); }

int PrototypeBank::row_of(int verb, int noun) const {
    for (size_t r = 0; r < keys.size(); ++r)
        if (keys[r].first == verb && keys[r].second == noun) return static_cast<int>(r);
    return -1;
}

uint32_t PrototypeBank::payload_crc() const {
    return crc32_bytes(values.data(), values.size() * sizeof(float));
}

BankMap build_banks(const Model& model, const SampleSet& ar_train, int threads) {
    if (ar_train.samples.empty()) throw ConfigError("build_banks: empty AR training set");
    if (ar_train.spec.name != "ar") throw ConfigError("build_banks: prototypes are built from AR samples");

    // Per-sample head features for every task, computed in parallel and
    // reduced in sample order so the result is independent of thread count.
    const auto features = prototype_features(model, ar_train, threads);

    BankMap banks;
    for (const auto& spec : model.tasks) {
        std::map<std::pair<int, int>, std::pair<Tensor, int>> acc;  // key -> (sum, count)
        for (size_t s = 0; s < ar_train.samples.size(); ++s) {
            const TaskSample& sample = ar_train.samples[s];
            const int target = sample.graph.target_indices().at(0);
            const std::pair<int, int> key{sample.graph.verb_labels[static_cast<size_t>(target)],
                                          sample.graph.noun_labels[static_cast<size_t>(target)]};
            const Tensor& f = features.at(spec.name)[s];
            auto it = acc.find(key);
            if (it == acc.end()) {
                acc.emplace(key, std::make_pair(f, 1));
            } else {
                axpy(1.0, f, it->second.first);
                it->second.second += 1;
            }
        }
        PrototypeBank bank;
        bank.task = spec.name;
        bank.dim = model.head_dim;
        for (auto& [key, sum_count] : acc) {
            bank.keys.push_back(key);
            bank.counts.push_back(sum_count.second);
            for (double v : sum_count.first.data)
                bank.values.push_back(static_cast<float>(v / sum_count.second));
        }
        bank.frozen = true;
        banks.emplace(spec.name, std::move(bank));
    }
    return banks;
}

std::vector<int> knn_cosine(const double* query, int dim, const PrototypeBank& bank, int k) {
    g_knn_queries.fetch_add(1, std::memory_order_relaxed);
    if (!bank.frozen) throw ConfigError("knn_cosine: bank must be frozen");
    if (dim != bank.dim) throw ShapeError("knn_cosine: query width does not match bank");
    if (k < 1 || k > bank.rows())
        throw ConfigError("knn_cosine: k must be within [1, rows] (k=" + std::to_string(k) +
                          ", rows=" + std::to_string(bank.rows()) + ")");
    double qn = 0.0;
    for (int c = 0; c < dim; ++c) qn += query[c] * query[c];
    qn = std::sqrt(qn);
    if (qn == 0.0) throw NumericError("knn_cosine: zero-norm query");

    std::vector<std::pair<double, int>> sims;
    sims.reserve(static_cast<size_t>(bank.rows()));
    for (int r = 0; r < bank.rows(); ++r) {
        const float* p = bank.row_ptr(r);
        double dot = 0.0, pn = 0.0;
        for (int c = 0; c < dim; ++c) {
            dot += query[c] * p[c];
            pn += static_cast<double>(p[c]) * p[c];
        }
        const double sim = pn == 0.0 ? -2.0 : dot / (qn * std::sqrt(pn));
        sims.emplace_back(sim, r);
    }
    std::partial_sort(sims.begin(), sims.begin() + k, sims.end(),
                      [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    std::vector<int> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out.push_back(sims[static_cast<size_t>(i)].second);
    return out;
}

std::vector<int> knn_cosine(const std::vector<double>& query, const PrototypeBank& bank, int k) {
    return knn_cosine(query.data(), static_cast<int>(query.size()), bank, k);
}

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path) {
    nlohmann::json header;
    header["task"] = bank.task;
    header["dim"] = bank.dim;
    header["rows"] = bank.rows();
    header["keys"] = nlohmann::json::array();
    for (auto [v, n] : bank.keys) header["keys"].push_back({v, n});
    header["counts"] = bank.counts;
    header["crc32"] = bank.payload_crc();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open bank file for writing: " + path.string());
    out << header.dump() << "\n";
    static_assert(sizeof(float) == 4);
    static_assert(std::endian::native == std::endian::little,
                  "bank payload is little-endian float32");
    out.write(reinterpret_cast<const char*>(bank.values.data()),
              static_cast<std::streamsize>(bank.values.size() * 4));
    if (!out) throw IoError("failed writing bank file: " + path.string());
}

PrototypeBank load_bank(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("missing prototype bank: " + path.string());
    std::string header_line;
    if (!std::getline(in, header_line)) throw IoError("truncated bank header: " + path.string());
    nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
    if (header.is_discarded()) throw IoError("corrupt bank header: " + path.string());

    PrototypeBank bank;
    bank.task = header.at("task").get<std::string>();
    bank.dim = header.at("dim").get<int>();
    const int rows = header.at("rows").get<int>();
    for (const auto& k : header.at("keys"))
        bank.keys.emplace_back(k.at(0).get<int>(), k.at(1).get<int>());
    bank.counts = header.at("counts").get<std::vector<int>>();
    if (static_cast<int>(bank.keys.size()) != rows || static_cast<int>(bank.counts.size()) != rows)
        throw IoError("bank header row mismatch: " + path.string());

    bank.values.resize(static_cast<size_t>(rows) * bank.dim);
    in.read(reinterpret_cast<char*>(bank.values.data()),
            static_cast<std::streamsize>(bank.values.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(bank.values.size() * 4))
        throw IoError("truncated bank payload: " + path.string());

    const uint32_t expected = header.at("crc32").get<uint32_t>();
    if (bank.payload_crc() != expected)
        throw IoError("bank checksum mismatch: " + path.string());
    bank.frozen = true;
    return bank;
}

}  // namespace egopack
