#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <openssl/evp.h>

namespace affect_forge {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of `bytes`.
inline Digest sha256(std::string_view bytes) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
        throw std::runtime_error("SHA-256 computation failed");
    return out;
}

inline std::string to_hex(const Digest& d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : d) {
        s += kHex[b >> 4];
        s += kHex[b & 0xF];
    }
    return s;
}

} // namespace affect_forge
