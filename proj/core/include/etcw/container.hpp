#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "etcw/huffman.hpp"
#include "etcw/parallel_decode.hpp"
#include "etcw/quantizer.hpp"

namespace etcw {

// On-disk archive of entropy-coded tensors. Layout, little-endian:
//   magic "ETCW" | u16 version | u8 bits | u8 flags (bit0: block
//   granularity) | u32 tensor count | u64 shuffle_seed |
//   u32 target_elements | u32 block_size | u16 model name length +
//   bytes | per tensor:
//     u16 name length + bytes | u8 rank + u32 dims |
//     u8 scheme | params: one (f32 scale, f32 zero_point), or
//       u32 block count + that many pairs under block granularity |
//     2^bits codebook length bytes | u32 segment count |
//     per segment: u32 element_count, u64 byte_offset, u64 bit_length |
//     u64 tensor checksum (FNV-1a 64 of the record bytes up to this
//       field plus the tensor's payload slice)
//   | payload blob | u64 archive checksum (FNV-1a 64 of everything
//   before it).

inline constexpr char kArchiveMagic[4] = {'E', 'T', 'C', 'W'};
inline constexpr std::uint16_t kArchiveVersion = 1;

struct SegmentEntry {
    std::uint32_t element_count = 0;
    std::uint64_t byte_offset = 0;  // into the payload blob
    std::uint64_t bit_length = 0;
};

struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> shape;
    Scheme scheme = Scheme::Asymmetric;
    std::vector<std::pair<float, float>> params;  // (scale, zero_point)
    std::vector<std::uint8_t> codebook_lengths;   // 2^bits bytes
    std::vector<SegmentEntry> segments;
    std::uint64_t checksum = 0;
    // Byte span of this record within the archive (excluding the
    // checksum field); what the per-tensor checksum covers together
    // with the payload slice.
    std::uint64_t record_hash_begin = 0;
    std::uint64_t record_hash_end = 0;

    std::uint64_t element_count() const { return shape_elements(shape); }
    std::uint64_t payload_bytes() const;
};

struct ModelArchive {
    std::uint16_t format_version = kArchiveVersion;
    std::string model_name;
    int bits = 8;
    Granularity granularity = Granularity::Tensor;
    std::uint32_t block_size = 0;
    std::uint64_t shuffle_seed = 0;
    std::uint32_t target_elements = 0;
    std::vector<TensorRecord> records;
    std::vector<std::uint8_t> payload;
    std::uint64_t archive_checksum = 0;
    std::uint64_t header_bytes = 0;  // everything before the payload

    std::span<const std::uint8_t> tensor_payload(std::size_t index) const;
    std::uint64_t file_bytes() const { return header_bytes + payload.size() + 8; }
};

// One fully compressed tensor, ready for the container.
struct CompressedTensor {
    QuantTensor quant;
    HuffmanCodebook codebook;
    Bitstream bitstream;          // byte-aligned segment concatenation
    std::vector<Segment> segments;
};

struct ArchiveOptions {
    std::uint64_t shuffle_seed = 0;
    std::uint32_t target_elements = 65536;  // 0 = one segment per tensor
};

// Deterministic serialization: identical inputs give identical bytes.
// Throws on duplicate tensor names or inconsistent segment totals
// before emitting anything.
std::vector<std::uint8_t> serialize_archive(const std::string& model_name,
                                            std::span<const CompressedTensor> tensors,
                                            const ArchiveOptions& options);

void write_archive(const std::string& model_name, std::span<const CompressedTensor> tensors,
                   const ArchiveOptions& options, const std::filesystem::path& path);

// Parses and verifies: magic, version, per-tensor checksums (errors
// name the tensor), archive checksum, codebook Kraft equality, segment
// totals. The payload is kept in memory; slices are handed out on
// demand.
ModelArchive read_archive(const std::filesystem::path& path);
ModelArchive parse_archive(std::span<const std::uint8_t> bytes);

// Reassembles the decode-side view of one tensor.
EncodedTensor encoded_tensor_view(const ModelArchive& archive, std::size_t index);

// Rebuilds the QuantTensor from a record plus decoded codes.
QuantTensor quant_tensor_from_record(const ModelArchive& archive, std::size_t index,
                                     std::vector<std::uint8_t> codes);

struct TensorStats {
    std::string name;
    std::uint64_t elements = 0;
    int bits = 8;
    Scheme scheme = Scheme::Asymmetric;
    std::uint32_t segment_count = 0;
    std::uint64_t payload_bytes = 0;
    std::uint64_t record_bytes = 0;
    double entropy = 0.0;           // of the decoded code histogram
    double avg_code_length = 0.0;   // codebook x histogram
    double effective_bits = 0.0;    // 8 * payload_bytes / elements
    double bits_saved = 0.0;        // bits - effective_bits
    double compression_ratio_fp16 = 0.0;  // 16 / ((payload+record)*8/elements)
    double header_overhead = 0.0;   // record / (record + payload)
    std::vector<std::uint64_t> histogram;
};

struct ArchiveStats {
    std::uint64_t total_elements = 0;
    std::uint64_t file_bytes = 0;
    std::uint64_t header_bytes = 0;
    std::uint64_t payload_bytes = 0;
    double effective_bits = 0.0;    // parameter-weighted, payload only
    double bits_saved = 0.0;
    double avg_code_length = 0.0;   // parameter-weighted
    double compression_ratio_fp16 = 0.0;  // 16 / (file_bits / elements)
    double header_overhead = 0.0;
    std::vector<TensorStats> tensors;
};

// Decodes the payload to rebuild per-tensor histograms, then reports
// the compressibility metrics per tensor and parameter-weighted across
// the model. include_histograms controls whether the full 2^bits
// histograms are retained in the result.
ArchiveStats archive_stats(const ModelArchive& archive, bool include_histograms = false);

}  // namespace etcw
