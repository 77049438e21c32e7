#include "egopack/common.hpp"

#include <zlib.h>

namespace egopack {

uint32_t crc32_bytes(const void* data, size_t n) {
    return crc32_update(0u, data, n);
}

uint32_t crc32_update(uint32_t crc, const void* data, size_t n) {
    return static_cast<uint32_t>(
        ::crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace egopack
