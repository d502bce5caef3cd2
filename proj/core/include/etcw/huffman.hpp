#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "etcw/bitstream.hpp"
#include "etcw/quantizer.hpp"

namespace etcw {

// Canonical Huffman coding over the 2^b integer alphabet of one
// quantized tensor.

struct SymbolHistogram {
    int bits = 8;
    std::vector<std::uint64_t> counts;  // size 2^bits, indexed by symbol
    std::uint64_t total = 0;

    int alphabet_size() const { return 1 << bits; }
};

SymbolHistogram build_histogram(std::span<const std::uint8_t> codes, int bits);
SymbolHistogram build_histogram(const QuantTensor& quant);

// -sum p log2 p over present symbols, in bits per symbol.
double shannon_entropy(const SymbolHistogram& hist);

// A canonical prefix code is fully determined by its length vector:
// codes are assigned in (length, symbol) order, shorter lengths first.
struct HuffmanCodebook {
    int bits = 8;
    std::vector<std::uint8_t> lengths;  // size 2^bits, 0 = symbol absent
    int max_length = 0;
    std::vector<std::uint64_t> codes;   // canonical code values, valid where lengths > 0

    int alphabet_size() const { return 1 << bits; }
};

// Optimal code lengths via Huffman tree construction. Ties are broken
// deterministically: lower symbol value first, then earlier creation
// order of merged nodes. A single present symbol gets length 1.
HuffmanCodebook build_codebook(const SymbolHistogram& hist);

// Reconstructs a codebook from its wire form (one length byte per
// symbol) and verifies the Kraft equality (or the single-symbol 1/2
// convention). Throws CorruptionError on an inconsistent length vector.
HuffmanCodebook codebook_from_lengths(std::span<const std::uint8_t> lengths, int bits);

// sum(counts[s] * lengths[s]) / total: the effective bit-width of the
// code. bits_saved = bits - average_code_length.
double average_code_length(const HuffmanCodebook& book, const SymbolHistogram& hist);

// Encodes symbols in element order, each code MSB-first.
Bitstream encode(std::span<const std::uint8_t> codes, const HuffmanCodebook& book);

// Table-accelerated canonical decoder, shareable across threads.
class HuffmanDecoder {
public:
    explicit HuffmanDecoder(const HuffmanCodebook& book);

    // Decodes out.size() symbols and requires the reader to hold
    // exactly that many (no trailing data). Throws CorruptionError on
    // exhaustion, trailing bits, or an invalid prefix.
    void decode(BitReader& reader, std::span<std::uint8_t> out) const;

private:
    std::uint8_t decode_one(BitReader& reader) const;

    int max_length_ = 0;
    unsigned table_bits_ = 0;
    // first_code_/count_/offset_ implement the textbook canonical
    // decode; the table short-circuits prefixes up to table_bits_.
    std::vector<std::uint64_t> first_code_;
    std::vector<std::uint32_t> count_;
    std::vector<std::uint32_t> offset_;
    std::vector<std::uint8_t> symbols_;       // in (length, symbol) order
    std::vector<std::uint8_t> table_symbol_;
    std::vector<std::uint8_t> table_length_;  // 0 = fall through to slow path
};

// Decodes exactly n symbols and requires the stream to be fully
// consumed; decode_serial(encode(x)) == x.
std::vector<std::uint8_t> decode_serial(const Bitstream& stream, const HuffmanCodebook& book,
                                        std::uint64_t n);

}  // namespace etcw
