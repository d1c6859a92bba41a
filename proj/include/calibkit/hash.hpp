#ifndef CALIBKIT_HASH_HPP
#define CALIBKIT_HASH_HPP

#include <cstdint>
#include <cstdio>
#include <string>

namespace calibkit {

/// 64-bit FNV-1a, incremental. Used for provenance fingerprints, not security.
class Fnv1a {
public:
    void update(const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return h_; }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace calibkit

#endif
