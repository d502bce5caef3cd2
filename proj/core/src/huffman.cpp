#include "etcw/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "etcw/errors.hpp"

namespace etcw {

namespace {

void check_bits(int bits) {
    if (bits != 4 && bits != 8) {
        throw ValidationError("bits must be 4 or 8, got " + std::to_string(bits));
    }
}

// Depth of every leaf of the Huffman tree. Nodes are created leaves
// first (ascending symbol), then merges; the heap orders by (weight,
// creation id), which fixes the tie-break deterministically.
std::vector<std::uint8_t> huffman_lengths(const SymbolHistogram& hist) {
    struct Node {
        std::uint64_t weight;
        std::uint32_t id;
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::int32_t symbol = -1;
    };
    std::vector<Node> nodes;
    for (int s = 0; s < hist.alphabet_size(); ++s) {
        if (hist.counts[s] > 0) {
            nodes.push_back({hist.counts[s], static_cast<std::uint32_t>(nodes.size()),
                             -1, -1, s});
        }
    }
    std::vector<std::uint8_t> lengths(hist.alphabet_size(), 0);
    if (nodes.empty()) {
        throw ValidationError("histogram has no present symbols");
    }
    if (nodes.size() == 1) {
        lengths[nodes[0].symbol] = 1;
        return lengths;
    }

    using Entry = std::pair<std::uint64_t, std::uint32_t>;  // (weight, id)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (const Node& node : nodes) heap.emplace(node.weight, node.id);
    while (heap.size() > 1) {
        const auto [w1, id1] = heap.top();
        heap.pop();
        const auto [w2, id2] = heap.top();
        heap.pop();
        Node merged{w1 + w2, static_cast<std::uint32_t>(nodes.size()),
                    static_cast<std::int32_t>(id1), static_cast<std::int32_t>(id2), -1};
        heap.emplace(merged.weight, merged.id);
        nodes.push_back(merged);
    }

    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;  // (id, depth)
    stack.emplace_back(heap.top().second, 0);
    while (!stack.empty()) {
        const auto [id, depth] = stack.back();
        stack.pop_back();
        const Node& node = nodes[id];
        if (node.symbol >= 0) {
            if (depth > 64) {
                // Needs a total count beyond ~2.7e13 elements; unreachable
                // for any model this toolkit targets.
                throw InternalError("Huffman code length exceeds 64 bits");
            }
            lengths[node.symbol] = static_cast<std::uint8_t>(depth);
        } else {
            stack.emplace_back(static_cast<std::uint32_t>(node.left), depth + 1);
            stack.emplace_back(static_cast<std::uint32_t>(node.right), depth + 1);
        }
    }
    return lengths;
}

// Canonical code values in (length, symbol) order.
void assign_canonical(HuffmanCodebook& book) {
    std::vector<int> present;
    for (int s = 0; s < book.alphabet_size(); ++s) {
        if (book.lengths[s] > 0) present.push_back(s);
    }
    std::sort(present.begin(), present.end(), [&](int a, int b) {
        if (book.lengths[a] != book.lengths[b]) return book.lengths[a] < book.lengths[b];
        return a < b;
    });
    book.codes.assign(book.alphabet_size(), 0);
    book.max_length = 0;
    std::uint64_t code = 0;
    int prev_len = present.empty() ? 0 : book.lengths[present.front()];
    for (int s : present) {
        const int len = book.lengths[s];
        code <<= (len - prev_len);
        book.codes[s] = code;
        ++code;
        prev_len = len;
        book.max_length = std::max(book.max_length, len);
    }
}

void check_kraft(const HuffmanCodebook& book) {
    unsigned __int128 sum = 0;
    int present = 0;
    int single_symbol = -1;
    for (int s = 0; s < book.alphabet_size(); ++s) {
        const int len = book.lengths[s];
        if (len == 0) continue;
        if (len > 64) throw CorruptionError("codebook length exceeds 64 bits");
        sum += static_cast<unsigned __int128>(1) << (64 - len);
        ++present;
        single_symbol = s;
    }
    if (present == 0) throw CorruptionError("codebook has no present symbols");
    const unsigned __int128 one = static_cast<unsigned __int128>(1) << 64;
    if (present == 1) {
        if (book.lengths[single_symbol] != 1) {
            throw CorruptionError("single-symbol codebook must use length 1");
        }
        return;  // Kraft sum 1/2 by convention
    }
    if (sum != one) {
        throw CorruptionError("codebook violates the Kraft equality");
    }
}

}  // namespace

SymbolHistogram build_histogram(std::span<const std::uint8_t> codes, int bits) {
    check_bits(bits);
    if (codes.empty()) throw ValidationError("cannot build a histogram of an empty tensor");
    SymbolHistogram hist;
    hist.bits = bits;
    hist.counts.assign(static_cast<std::size_t>(1) << bits, 0);
    for (std::uint8_t c : codes) {
        if (c >= hist.counts.size()) {
            throw ValidationError("code " + std::to_string(c) + " out of range for " +
                                  std::to_string(bits) + "-bit alphabet");
        }
        ++hist.counts[c];
    }
    hist.total = codes.size();
    return hist;
}

SymbolHistogram build_histogram(const QuantTensor& quant) {
    return build_histogram(std::span<const std::uint8_t>(quant.codes), quant.bits());
}

double shannon_entropy(const SymbolHistogram& hist) {
    double entropy = 0.0;
    const double total = static_cast<double>(hist.total);
    for (std::uint64_t count : hist.counts) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / total;
        entropy -= p * std::log2(p);
    }
    return entropy;
}

HuffmanCodebook build_codebook(const SymbolHistogram& hist) {
    check_bits(hist.bits);
    HuffmanCodebook book;
    book.bits = hist.bits;
    book.lengths = huffman_lengths(hist);
    assign_canonical(book);
    return book;
}

HuffmanCodebook codebook_from_lengths(std::span<const std::uint8_t> lengths, int bits) {
    check_bits(bits);
    if (lengths.size() != (static_cast<std::size_t>(1) << bits)) {
        throw CorruptionError("codebook length vector has wrong size");
    }
    HuffmanCodebook book;
    book.bits = bits;
    book.lengths.assign(lengths.begin(), lengths.end());
    check_kraft(book);
    assign_canonical(book);
    return book;
}

double average_code_length(const HuffmanCodebook& book, const SymbolHistogram& hist) {
    if (book.bits != hist.bits) {
        throw ValidationError("codebook and histogram alphabets differ");
    }
    std::uint64_t total_bits = 0;
    for (int s = 0; s < book.alphabet_size(); ++s) {
        if (hist.counts[s] == 0) continue;
        if (book.lengths[s] == 0) {
            throw ValidationError("symbol " + std::to_string(s) +
                                  " has a positive count but no code");
        }
        total_bits += hist.counts[s] * book.lengths[s];
    }
    return static_cast<double>(total_bits) / static_cast<double>(hist.total);
}

Bitstream encode(std::span<const std::uint8_t> codes, const HuffmanCodebook& book) {
    BitWriter writer;
    for (std::uint8_t c : codes) {
        if (c >= book.lengths.size() || book.lengths[c] == 0) {
            throw ValidationError("code " + std::to_string(c) + " is absent from the codebook");
        }
        writer.put(book.codes[c], book.lengths[c]);
    }
    return writer.finish();
}

HuffmanDecoder::HuffmanDecoder(const HuffmanCodebook& book) {
    max_length_ = book.max_length;
    if (max_length_ <= 0 || max_length_ > 64) {
        throw ValidationError("codebook has no assigned codes");
    }
    first_code_.assign(max_length_ + 1, 0);
    count_.assign(max_length_ + 1, 0);
    offset_.assign(max_length_ + 1, 0);

    std::vector<int> present;
    for (int s = 0; s < book.alphabet_size(); ++s) {
        if (book.lengths[s] > 0) present.push_back(s);
    }
    std::sort(present.begin(), present.end(), [&](int a, int b) {
        if (book.lengths[a] != book.lengths[b]) return book.lengths[a] < book.lengths[b];
        return a < b;
    });
    symbols_.reserve(present.size());
    for (int s : present) {
        const int len = book.lengths[s];
        if (count_[len] == 0) {
            first_code_[len] = book.codes[s];
            offset_[len] = static_cast<std::uint32_t>(symbols_.size());
        }
        ++count_[len];
        symbols_.push_back(static_cast<std::uint8_t>(s));
    }

    table_bits_ = static_cast<unsigned>(std::min(max_length_, 11));
    table_symbol_.assign(static_cast<std::size_t>(1) << table_bits_, 0);
    table_length_.assign(static_cast<std::size_t>(1) << table_bits_, 0);
    for (int s : present) {
        const unsigned len = book.lengths[s];
        if (len > table_bits_) continue;
        const std::uint64_t base = book.codes[s] << (table_bits_ - len);
        const std::uint64_t span = static_cast<std::uint64_t>(1) << (table_bits_ - len);
        for (std::uint64_t i = 0; i < span; ++i) {
            table_symbol_[base + i] = static_cast<std::uint8_t>(s);
            table_length_[base + i] = static_cast<std::uint8_t>(len);
        }
    }
}

std::uint8_t HuffmanDecoder::decode_one(BitReader& reader) const {
    const std::uint64_t window = reader.peek(table_bits_);
    const std::uint8_t table_len = table_length_[window];
    if (table_len != 0) {
        if (table_len > reader.bits_remaining()) {
            throw CorruptionError("bitstream exhausted");
        }
        reader.consume(table_len);
        return table_symbol_[window];
    }
    // Long code: extend bit by bit past the table width.
    std::uint64_t code = window >> 1;  // first table_bits_ - 1 bits are consumed below
    if (table_bits_ > reader.bits_remaining()) {
        // Short tail that matched no table entry cannot be a valid code.
        throw CorruptionError("bitstream exhausted");
    }
    reader.consume(table_bits_ - 1);
    for (int len = static_cast<int>(table_bits_); len <= max_length_; ++len) {
        code = (code << 1) | reader.read_bit();
        if (count_[len] != 0 && code >= first_code_[len] &&
            code - first_code_[len] < count_[len]) {
            return symbols_[offset_[len] + static_cast<std::uint32_t>(code - first_code_[len])];
        }
    }
    throw CorruptionError("invalid prefix in bitstream");
}

void HuffmanDecoder::decode(BitReader& reader, std::span<std::uint8_t> out) const {
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = decode_one(reader);
    }
    if (reader.bits_remaining() != 0) {
        throw CorruptionError("bitstream has " + std::to_string(reader.bits_remaining()) +
                              " trailing bits after the expected symbol count");
    }
}

std::vector<std::uint8_t> decode_serial(const Bitstream& stream, const HuffmanCodebook& book,
                                        std::uint64_t n) {
    HuffmanDecoder decoder(book);
    std::vector<std::uint8_t> out(n);
    BitReader reader(stream);
    decoder.decode(reader, out);
    return out;
}

}  // namespace etcw
