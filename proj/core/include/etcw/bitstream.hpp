#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "etcw/errors.hpp"

namespace etcw {

// Packed bits, MSB-first within each byte: bit i of the stream is
// (payload[i / 8] >> (7 - i % 8)) & 1. Trailing pad bits are zero.
struct Bitstream {
    std::vector<std::uint8_t> payload;
    std::uint64_t bit_length = 0;
};

class BitWriter {
public:
    // Appends the low `count` bits of `value`, most significant first.
    void put(std::uint64_t value, unsigned count) {
        while (count > 32) {
            put32(static_cast<std::uint32_t>(value >> (count - 32)), 32);
            count -= 32;
        }
        put32(static_cast<std::uint32_t>(value & ((count == 64 ? ~0ull : (1ull << count) - 1))),
              count);
    }

    std::uint64_t bit_count() const { return bytes_.size() * 8 + pending_count_; }

    // Flushes with zero padding to a byte boundary.
    Bitstream finish() {
        Bitstream out;
        out.bit_length = bit_count();
        if (pending_count_ > 0) {
            bytes_.push_back(static_cast<std::uint8_t>(
                pending_ << (8 - pending_count_)));
            pending_ = 0;
            pending_count_ = 0;
        }
        out.payload = std::move(bytes_);
        bytes_.clear();
        return out;
    }

private:
    void put32(std::uint32_t value, unsigned count) {
        if (count == 0) return;
        std::uint64_t acc = (static_cast<std::uint64_t>(pending_) << count) | value;
        unsigned total = pending_count_ + count;
        while (total >= 8) {
            bytes_.push_back(static_cast<std::uint8_t>(acc >> (total - 8)));
            total -= 8;
        }
        pending_count_ = total;
        pending_ = static_cast<std::uint32_t>(acc & ((1u << total) - 1));
    }

    std::vector<std::uint8_t> bytes_;
    std::uint32_t pending_ = 0;       // low pending_count_ bits are valid
    unsigned pending_count_ = 0;
};

class BitReader {
public:
    BitReader(std::span<const std::uint8_t> bytes, std::uint64_t bit_length)
        : data_(bytes.data()), bit_length_(bit_length) {
        if (bit_length > bytes.size() * 8) {
            throw CorruptionError("bitstream shorter than its declared bit length");
        }
    }

    explicit BitReader(const Bitstream& stream)
        : BitReader(std::span<const std::uint8_t>(stream.payload), stream.bit_length) {}

    std::uint64_t bits_consumed() const { return pos_; }
    std::uint64_t bits_remaining() const { return bit_length_ - pos_; }

    // Next `count` bits without consuming, zero-padded past the end.
    // count <= 57 so the unaligned 8-byte window below always covers it.
    std::uint64_t peek(unsigned count) const {
        std::uint64_t window = 0;
        const std::uint64_t byte_pos = pos_ >> 3;
        const std::uint64_t total_bytes = (bit_length_ + 7) / 8;
        for (unsigned i = 0; i < 8; ++i) {
            window <<= 8;
            if (byte_pos + i < total_bytes) window |= data_[byte_pos + i];
        }
        window <<= (pos_ & 7);           // discard already-consumed bits
        return window >> (64 - count - 7) >> 7;
    }

    void consume(unsigned count) { pos_ += count; }

    std::uint32_t read_bit() {
        if (pos_ >= bit_length_) {
            throw CorruptionError("bitstream exhausted");
        }
        const std::uint32_t bit = (data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
        ++pos_;
        return bit;
    }

private:
    const std::uint8_t* data_;
    std::uint64_t bit_length_;
    std::uint64_t pos_ = 0;
};

}  // namespace etcw
