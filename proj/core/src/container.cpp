#include "etcw/container.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "etcw/errors.hpp"
#include "etcw/fnv1a.hpp"

namespace etcw {

namespace {

void append_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t size) {
    const auto* bytes = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), bytes, bytes + size);
}

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(out, bits);
}

// Bounds-checked little-endian reader; corrupt length fields surface as
// CorruptionError rather than out-of-range reads.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32() {
        const auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    std::uint64_t u64() {
        const auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::span<const std::uint8_t> take(std::size_t count) {
        if (count > remaining()) {
            throw CorruptionError("archive truncated (record field extends past end of file)");
        }
        const auto slice = bytes_.subspan(pos_, count);
        pos_ += count;
        return slice;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void validate_compressed(const CompressedTensor& tensor) {
    const std::uint64_t elements = tensor.quant.element_count();
    if (tensor.quant.name.empty()) throw ValidationError("tensor with empty name");
    std::uint64_t segment_elements = 0;
    std::uint64_t bit_cursor = 0;
    for (const Segment& segment : tensor.segments) {
        if (segment.bit_offset != bit_cursor) {
            throw ValidationError("tensor '" + tensor.quant.name +
                                  "': segments are not byte-aligned contiguous");
        }
        segment_elements += segment.element_count;
        bit_cursor = (segment.bit_offset + segment.bit_length + 7) / 8 * 8;
    }
    if (segment_elements != elements) {
        throw ValidationError("tensor '" + tensor.quant.name + "': segment totals (" +
                              std::to_string(segment_elements) + ") disagree with shape (" +
                              std::to_string(elements) + ")");
    }
    if (tensor.bitstream.payload.size() != bit_cursor / 8) {
        throw ValidationError("tensor '" + tensor.quant.name +
                              "': payload size disagrees with segment table");
    }
    const std::size_t expected_params =
        tensor.quant.granularity == Granularity::Tensor
            ? 1
            : (elements + tensor.quant.block_size - 1) / tensor.quant.block_size;
    if (tensor.quant.params.size() != expected_params) {
        throw ValidationError("tensor '" + tensor.quant.name + "': parameter count mismatch");
    }
}

}  // namespace

std::uint64_t TensorRecord::payload_bytes() const {
    std::uint64_t bytes = 0;
    for (const SegmentEntry& segment : segments) {
        bytes += (segment.bit_length + 7) / 8;
    }
    return bytes;
}

std::span<const std::uint8_t> ModelArchive::tensor_payload(std::size_t index) const {
    const TensorRecord& record = records[index];
    if (record.segments.empty()) return {};
    const std::uint64_t begin = record.segments.front().byte_offset;
    return std::span<const std::uint8_t>(payload).subspan(begin, record.payload_bytes());
}

std::vector<std::uint8_t> serialize_archive(const std::string& model_name,
                                            std::span<const CompressedTensor> tensors,
                                            const ArchiveOptions& options) {
    std::unordered_set<std::string> seen;
    int bits = tensors.empty() ? 8 : tensors.front().quant.bits();
    Granularity granularity =
        tensors.empty() ? Granularity::Tensor : tensors.front().quant.granularity;
    std::uint32_t block_size = tensors.empty() ? 0 : tensors.front().quant.block_size;
    for (const CompressedTensor& tensor : tensors) {
        validate_compressed(tensor);
        if (!seen.insert(tensor.quant.name).second) {
            throw ValidationError("duplicate tensor name '" + tensor.quant.name + "'");
        }
        if (tensor.quant.bits() != bits) {
            throw ValidationError("mixed bit-widths in one archive are not supported");
        }
        if (tensor.quant.granularity != granularity || tensor.quant.block_size != block_size) {
            throw ValidationError("mixed granularities in one archive are not supported");
        }
        if (tensor.codebook.lengths.size() != (static_cast<std::size_t>(1) << bits)) {
            throw ValidationError("tensor '" + tensor.quant.name + "': codebook size mismatch");
        }
    }

    std::vector<std::uint8_t> out;
    append_bytes(out, kArchiveMagic, sizeof(kArchiveMagic));
    put_u16(out, kArchiveVersion);
    put_u8(out, static_cast<std::uint8_t>(bits));
    put_u8(out, granularity == Granularity::Block ? 0x01 : 0x00);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    put_u64(out, options.shuffle_seed);
    put_u32(out, options.target_elements);
    put_u32(out, block_size);
    if (model_name.size() > 0xffff) throw ValidationError("model name too long");
    put_u16(out, static_cast<std::uint16_t>(model_name.size()));
    append_bytes(out, model_name.data(), model_name.size());

    std::uint64_t payload_offset = 0;
    for (const CompressedTensor& tensor : tensors) {
        const std::size_t record_start = out.size();
        const std::string& name = tensor.quant.name;
        if (name.size() > 0xffff) throw ValidationError("tensor name too long");
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        append_bytes(out, name.data(), name.size());
        if (tensor.quant.shape.size() > 0xff) throw ValidationError("tensor rank too large");
        put_u8(out, static_cast<std::uint8_t>(tensor.quant.shape.size()));
        for (std::uint32_t dim : tensor.quant.shape) put_u32(out, dim);
        put_u8(out, static_cast<std::uint8_t>(tensor.quant.params.front().scheme));
        if (granularity == Granularity::Block) {
            put_u32(out, static_cast<std::uint32_t>(tensor.quant.params.size()));
        }
        for (const QuantParams& params : tensor.quant.params) {
            put_f32(out, static_cast<float>(params.scale));
            put_f32(out, static_cast<float>(params.zero_point));
        }
        append_bytes(out, tensor.codebook.lengths.data(), tensor.codebook.lengths.size());
        put_u32(out, static_cast<std::uint32_t>(tensor.segments.size()));
        for (const Segment& segment : tensor.segments) {
            put_u32(out, segment.element_count);
            put_u64(out, payload_offset + segment.bit_offset / 8);
            put_u64(out, segment.bit_length);
        }
        Fnv1a64 tensor_hash;
        tensor_hash.update(out.data() + record_start, out.size() - record_start);
        tensor_hash.update(tensor.bitstream.payload.data(), tensor.bitstream.payload.size());
        put_u64(out, tensor_hash.digest());
        payload_offset += tensor.bitstream.payload.size();
    }

    for (const CompressedTensor& tensor : tensors) {
        append_bytes(out, tensor.bitstream.payload.data(), tensor.bitstream.payload.size());
    }
    put_u64(out, fnv1a64(out.data(), out.size()));
    return out;
}

void write_archive(const std::string& model_name, std::span<const CompressedTensor> tensors,
                   const ArchiveOptions& options, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = serialize_archive(model_name, tensors, options);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write archive '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw ValidationError("failed writing archive '" + path.string() + "'");
}

ModelArchive parse_archive(std::span<const std::uint8_t> bytes) {
    ByteReader reader(bytes);
    const auto magic = reader.take(4);
    if (std::memcmp(magic.data(), kArchiveMagic, 4) != 0) {
        throw CorruptionError("bad magic: not an ETCW archive");
    }
    ModelArchive archive;
    archive.format_version = reader.u16();
    if (archive.format_version != kArchiveVersion) {
        throw CorruptionError("unsupported archive version " +
                              std::to_string(archive.format_version));
    }
    archive.bits = reader.u8();
    if (archive.bits != 4 && archive.bits != 8) {
        throw CorruptionError("archive bit-width must be 4 or 8");
    }
    const std::uint8_t flags = reader.u8();
    if (flags & ~0x01u) throw CorruptionError("unknown archive flags");
    archive.granularity = (flags & 0x01u) ? Granularity::Block : Granularity::Tensor;
    const std::uint32_t tensor_count = reader.u32();
    archive.shuffle_seed = reader.u64();
    archive.target_elements = reader.u32();
    archive.block_size = reader.u32();
    if (archive.granularity == Granularity::Block && archive.block_size < 2) {
        throw CorruptionError("block-granular archive with block_size < 2");
    }
    const std::uint16_t model_name_len = reader.u16();
    const auto model_name_bytes = reader.take(model_name_len);
    archive.model_name.assign(model_name_bytes.begin(), model_name_bytes.end());

    const std::size_t alphabet = static_cast<std::size_t>(1) << archive.bits;
    std::uint64_t payload_cursor = 0;
    std::unordered_set<std::string> seen;
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
        const std::size_t record_start = reader.position();
        TensorRecord record;
        const std::uint16_t name_len = reader.u16();
        const auto name_bytes = reader.take(name_len);
        record.name.assign(name_bytes.begin(), name_bytes.end());
        const std::string label =
            "tensor " + std::to_string(t) + " ('" + record.name + "')";
        if (!seen.insert(record.name).second) {
            throw CorruptionError(label + ": duplicate tensor name");
        }
        const std::uint8_t rank = reader.u8();
        record.shape.resize(rank);
        for (std::uint8_t d = 0; d < rank; ++d) {
            record.shape[d] = reader.u32();
            if (record.shape[d] == 0) throw CorruptionError(label + ": zero dimension");
        }
        const std::uint8_t scheme = reader.u8();
        if (scheme > 1) throw CorruptionError(label + ": unknown quantization scheme");
        record.scheme = static_cast<Scheme>(scheme);
        const std::uint64_t elements = shape_elements(record.shape);
        std::uint32_t param_count = 1;
        if (archive.granularity == Granularity::Block) {
            param_count = reader.u32();
            const std::uint64_t expected =
                (elements + archive.block_size - 1) / archive.block_size;
            if (param_count != expected) {
                throw CorruptionError(label + ": block parameter count mismatch");
            }
        }
        record.params.reserve(param_count);
        for (std::uint32_t p = 0; p < param_count; ++p) {
            const float scale = reader.f32();
            const float zero_point = reader.f32();
            if (!(scale > 0.0f) || !std::isfinite(scale) || !std::isfinite(zero_point)) {
                throw CorruptionError(label + ": invalid quantization parameters");
            }
            record.params.emplace_back(scale, zero_point);
        }
        const auto lengths = reader.take(alphabet);
        record.codebook_lengths.assign(lengths.begin(), lengths.end());
        try {
            codebook_from_lengths(record.codebook_lengths, archive.bits);
        } catch (const Error& e) {
            throw CorruptionError(label + ": " + e.what());
        }
        const std::uint32_t segment_count = reader.u32();
        // 20 bytes per entry; a corrupt count must not drive allocation.
        record.segments.reserve(
            std::min<std::size_t>(segment_count, reader.remaining() / 20));
        std::uint64_t segment_elements = 0;
        for (std::uint32_t s = 0; s < segment_count; ++s) {
            SegmentEntry segment;
            segment.element_count = reader.u32();
            segment.byte_offset = reader.u64();
            segment.bit_length = reader.u64();
            if (segment.byte_offset != payload_cursor) {
                throw CorruptionError(label + ": segment " + std::to_string(s) +
                                      " byte offset out of order");
            }
            payload_cursor += (segment.bit_length + 7) / 8;
            segment_elements += segment.element_count;
            record.segments.push_back(segment);
        }
        if (segment_elements != elements) {
            throw CorruptionError(label + ": segment totals disagree with shape");
        }
        record.checksum = reader.u64();
        // Stash the hashed span for later verification (record minus
        // its trailing checksum field).
        const std::size_t record_end = reader.position() - 8;
        record.record_hash_begin = record_start;
        record.record_hash_end = record_end;
        archive.records.push_back(std::move(record));
    }

    archive.header_bytes = reader.position();
    if (reader.remaining() < payload_cursor + 8) {
        throw CorruptionError("truncated payload");
    }
    if (reader.remaining() != payload_cursor + 8) {
        throw CorruptionError("archive has trailing bytes after payload");
    }
    const auto payload = reader.take(payload_cursor);
    archive.payload.assign(payload.begin(), payload.end());
    archive.archive_checksum = reader.u64();

    const std::uint64_t computed = fnv1a64(bytes.data(), bytes.size() - 8);
    // Per-tensor checksums first so corruption is localized when possible.
    for (std::size_t t = 0; t < archive.records.size(); ++t) {
        const TensorRecord& record = archive.records[t];
        Fnv1a64 hash;
        hash.update(bytes.data() + record.record_hash_begin,
                    record.record_hash_end - record.record_hash_begin);
        const auto slice = archive.tensor_payload(t);
        hash.update(slice.data(), slice.size());
        if (hash.digest() != record.checksum) {
            throw CorruptionError("tensor " + std::to_string(t) + " ('" + record.name +
                                  "'): checksum mismatch");
        }
    }
    if (computed != archive.archive_checksum) {
        throw CorruptionError("archive checksum mismatch");
    }
    return archive;
}

ModelArchive read_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open archive '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_archive(bytes);
}

EncodedTensor encoded_tensor_view(const ModelArchive& archive, std::size_t index) {
    const TensorRecord& record = archive.records[index];
    EncodedTensor tensor;
    tensor.name = record.name;
    tensor.codebook = codebook_from_lengths(record.codebook_lengths, archive.bits);
    const auto slice = archive.tensor_payload(index);
    tensor.bitstream.payload.assign(slice.begin(), slice.end());
    const std::uint64_t base =
        record.segments.empty() ? 0 : record.segments.front().byte_offset;
    std::uint64_t element_offset = 0;
    std::uint64_t bit_total = 0;
    for (std::size_t s = 0; s < record.segments.size(); ++s) {
        const SegmentEntry& entry = record.segments[s];
        Segment segment;
        segment.tensor_name = record.name;
        segment.segment_index = static_cast<std::uint32_t>(s);
        segment.element_offset = element_offset;
        segment.element_count = entry.element_count;
        segment.bit_offset = (entry.byte_offset - base) * 8;
        segment.bit_length = entry.bit_length;
        tensor.segments.push_back(std::move(segment));
        element_offset += entry.element_count;
        bit_total += entry.bit_length;
    }
    tensor.bitstream.bit_length = bit_total;
    return tensor;
}

QuantTensor quant_tensor_from_record(const ModelArchive& archive, std::size_t index,
                                     std::vector<std::uint8_t> codes) {
    const TensorRecord& record = archive.records[index];
    QuantTensor quant;
    quant.name = record.name;
    quant.shape = record.shape;
    quant.granularity = archive.granularity;
    quant.block_size = archive.granularity == Granularity::Block ? archive.block_size : 0;
    quant.codes = std::move(codes);
    if (quant.codes.size() != record.element_count()) {
        throw ValidationError("decoded code count disagrees with tensor shape");
    }
    quant.params.reserve(record.params.size());
    for (const auto& [scale, zero_point] : record.params) {
        QuantParams params;
        params.scheme = record.scheme;
        params.bits = archive.bits;
        params.scale = static_cast<double>(scale);
        params.zero_point = static_cast<double>(zero_point);
        params.degenerate = false;
        quant.params.push_back(params);
    }
    return quant;
}

ArchiveStats archive_stats(const ModelArchive& archive, bool include_histograms) {
    ArchiveStats stats;
    stats.file_bytes = archive.file_bytes();
    stats.header_bytes = archive.header_bytes + 8;  // trailing checksum counts as framing
    stats.payload_bytes = archive.payload.size();

    std::vector<EncodedTensor> views;
    views.reserve(archive.records.size());
    for (std::size_t t = 0; t < archive.records.size(); ++t) {
        views.push_back(encoded_tensor_view(archive, t));
    }
    auto decoded = decode_all_serial(views);

    double weighted_avg_len = 0.0;
    for (std::size_t t = 0; t < archive.records.size(); ++t) {
        const TensorRecord& record = archive.records[t];
        TensorStats ts;
        ts.name = record.name;
        ts.elements = record.element_count();
        ts.bits = archive.bits;
        ts.scheme = record.scheme;
        ts.segment_count = static_cast<std::uint32_t>(record.segments.size());
        ts.payload_bytes = record.payload_bytes();
        ts.record_bytes = (record.record_hash_end - record.record_hash_begin) + 8;

        const SymbolHistogram hist = build_histogram(decoded.at(record.name), archive.bits);
        const HuffmanCodebook book = codebook_from_lengths(record.codebook_lengths, archive.bits);
        ts.entropy = shannon_entropy(hist);
        ts.avg_code_length = average_code_length(book, hist);
        ts.effective_bits =
            8.0 * static_cast<double>(ts.payload_bytes) / static_cast<double>(ts.elements);
        ts.bits_saved = static_cast<double>(archive.bits) - ts.effective_bits;
        ts.compression_ratio_fp16 =
            16.0 * static_cast<double>(ts.elements) /
            (8.0 * static_cast<double>(ts.payload_bytes + ts.record_bytes));
        ts.header_overhead = static_cast<double>(ts.record_bytes) /
                             static_cast<double>(ts.record_bytes + ts.payload_bytes);
        if (include_histograms) ts.histogram = hist.counts;

        stats.total_elements += ts.elements;
        weighted_avg_len += ts.avg_code_length * static_cast<double>(ts.elements);
        stats.tensors.push_back(std::move(ts));
    }
    if (stats.total_elements > 0) {
        stats.effective_bits = 8.0 * static_cast<double>(stats.payload_bytes) /
                               static_cast<double>(stats.total_elements);
        stats.bits_saved = static_cast<double>(archive.bits) - stats.effective_bits;
        stats.avg_code_length = weighted_avg_len / static_cast<double>(stats.total_elements);
        stats.compression_ratio_fp16 = 16.0 * static_cast<double>(stats.total_elements) /
                                       (8.0 * static_cast<double>(stats.file_bytes));
        stats.header_overhead =
            static_cast<double>(stats.header_bytes) / static_cast<double>(stats.file_bytes);
    }
    return stats;
}

}  // namespace etcw
