#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace egopack {

// Error taxonomy. The CLI maps these to exit codes: ConfigError -> 2,
// IoError -> 3, everything else -> 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing, truncated or checksum-failing artifact files.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally invalid data (width mismatch, out-of-vocab label, ...).
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

uint32_t crc32_bytes(const void* data, size_t n);
uint32_t crc32_update(uint32_t crc, const void* data, size_t n);

uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t x);

// Derives an independent seed stream from a master seed and a tag.
// Used so parameter init does not depend on construction order and
// batch shuffles do not depend on each other.
inline uint64_t mix_seed(uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a64(tag));
}

}  // namespace egopack
