#pragma once

#include <cstdint>
#include <string>

namespace glint {

// FNV-1a, used to stamp artifacts with a stable config fingerprint
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_hash(const std::string& canonical_config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical_config)));
    return buf;
}

}  // namespace glint
