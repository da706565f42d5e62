#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace popfrac {

/// 64-bit FNV-1a. Used for content fingerprints persisted in artifacts.
class Fnv1a {
public:
    Fnv1a& update(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
        return *this;
    }

    /// Feeds a length prefix followed by the bytes so that field boundaries
    /// are unambiguous.
    Fnv1a& field(std::string_view bytes) {
        const std::uint64_t n = bytes.size();
        update(std::string_view(reinterpret_cast<const char*>(&n), sizeof(n)));
        return update(bytes);
    }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view bytes) { return Fnv1a().update(bytes).digest(); }

std::string to_hex(std::uint64_t value);
std::uint64_t from_hex(std::string_view text);

}  // namespace popfrac
