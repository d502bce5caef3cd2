#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace etcw {

// 64-bit FNV-1a. Public-domain algorithm with published test vectors:
//   fnv1a64("")       == 0xcbf29ce484222325
//   fnv1a64("a")      == 0xaf63dc4c8601ec8c
//   fnv1a64("foobar") == 0x85944171f73967e8
// Used for the per-tensor and whole-archive checksums.
class Fnv1a64 {
public:
    static constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ull;
    static constexpr std::uint64_t kPrime = 0x100000001b3ull;

    void update(const void* data, std::size_t size) noexcept {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            state_ ^= bytes[i];
            state_ *= kPrime;
        }
    }

    void update(std::span<const std::uint8_t> bytes) noexcept {
        update(bytes.data(), bytes.size());
    }

    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = kOffsetBasis;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t size) noexcept {
    Fnv1a64 h;
    h.update(data, size);
    return h.digest();
}

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
    return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace etcw
