#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "etcw/huffman.hpp"

namespace etcw {

// Segmented encoding and concurrent decoding. A tensor's codes are
// split into consecutive runs, each encoded independently against the
// shared per-tensor codebook and starting on a byte boundary, so any
// segment can be decoded without touching the others.

struct Segment {
    std::string tensor_name;
    std::uint32_t segment_index = 0;
    std::uint64_t element_offset = 0;  // prefix sum of earlier counts
    std::uint32_t element_count = 0;
    std::uint64_t bit_offset = 0;      // byte-aligned by construction
    std::uint64_t bit_length = 0;
};

// Splits codes into runs of target_elements (last run may be short) and
// encodes each run. The returned bitstream is the byte-aligned
// concatenation of the segment payloads; its bit_length is the sum of
// the segment bit lengths (alignment padding excluded).
std::pair<Bitstream, std::vector<Segment>> segment_tensor(std::span<const std::uint8_t> codes,
                                                          const HuffmanCodebook& book,
                                                          std::uint64_t target_elements,
                                                          std::string_view tensor_name);

// Work assignment: segments are permuted by a seeded Fisher-Yates
// shuffle, then dealt round-robin to workers. Shuffling many segments
// per worker evens out skewed per-segment decode costs.
struct DecodePlan {
    unsigned worker_count = 1;
    std::uint64_t shuffle_seed = 0;
    // Per worker, indices into the flattened segment list, in dealt order.
    std::vector<std::vector<std::uint32_t>> assignment;
};

DecodePlan build_plan(std::span<const Segment> segments, unsigned worker_count,
                      std::uint64_t shuffle_seed);

// One tensor's encoded form as consumed by the parallel decoder.
struct EncodedTensor {
    std::string name;
    HuffmanCodebook codebook;
    Bitstream bitstream;
    std::vector<Segment> segments;

    std::uint64_t element_count() const;
};

// Decodes every segment on plan.worker_count threads. Workers share
// only immutable inputs and each writes a disjoint slice of the
// pre-sized outputs, so the output path needs no locks and the result
// is independent of scheduling: it is bitwise equal to serial decoding
// for every worker count and shuffle seed. The first failure in
// (tensor, segment) order is rethrown with both named.
std::map<std::string, std::vector<std::uint8_t>> decode_parallel(
    std::span<const EncodedTensor> tensors, const DecodePlan& plan);

// The same traversal on the calling thread; the oracle decode_parallel
// is checked against, and the serial baseline for benchmarks.
std::map<std::string, std::vector<std::uint8_t>> decode_all_serial(
    std::span<const EncodedTensor> tensors);

// Flattened segment list in (tensor, segment) order, the index space
// used by DecodePlan.
std::vector<Segment> flatten_segments(std::span<const EncodedTensor> tensors);

// max/min per-worker element count (1.0 = perfectly balanced); reported
// by the bench command.
double plan_balance_ratio(const DecodePlan& plan, std::span<const Segment> segments);

}  // namespace etcw
