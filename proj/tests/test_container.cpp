#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"

#include "etcw/container.hpp"
#include "etcw/errors.hpp"
#include "test_util.hpp"

using namespace etcw;
using etcw::test::TempDir;

namespace {

std::vector<CompressedTensor> fixture_tensors(std::uint64_t seed, int bits,
                                              std::uint64_t target) {
    const std::vector<SyntheticTensorSpec> specs = {
        {"embed", {64, 32}, GaussianSpec{0.0, 0.02}},
        {"gate", {512}, UniformSpec{0.0, 1.0}},
        {"bias", {33}, GaussianOutlierSpec{0.0, 0.01, 0.02, 30.0}},
    };
    const auto tensors = generate_synthetic(specs, seed);
    std::vector<CompressedTensor> out;
    for (const FloatTensor& tensor : tensors) {
        out.push_back(test::compress_one(tensor, bits, target));
    }
    return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("container") {

TEST_CASE("write then read reproduces records and payload") {
    TempDir dir("roundtrip");
    const auto tensors = fixture_tensors(101, 8, 256);
    ArchiveOptions options;
    options.shuffle_seed = 9;
    options.target_elements = 256;
    write_archive("demo", tensors, options, dir.file("m.etcw"));

    const ModelArchive archive = read_archive(dir.file("m.etcw"));
    CHECK(archive.model_name == "demo");
    CHECK(archive.bits == 8);
    CHECK(archive.shuffle_seed == 9);
    CHECK(archive.target_elements == 256);
    CHECK(archive.granularity == Granularity::Tensor);
    REQUIRE(archive.records.size() == tensors.size());
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        const TensorRecord& record = archive.records[t];
        CHECK(record.name == tensors[t].quant.name);
        CHECK(record.shape == tensors[t].quant.shape);
        CHECK(record.scheme == tensors[t].quant.params.front().scheme);
        CHECK(record.codebook_lengths == tensors[t].codebook.lengths);
        REQUIRE(record.segments.size() == tensors[t].segments.size());
        const auto slice = archive.tensor_payload(t);
        REQUIRE(slice.size() == tensors[t].bitstream.payload.size());
        CHECK(std::memcmp(slice.data(), tensors[t].bitstream.payload.data(), slice.size()) == 0);
        CHECK(record.params.front().first ==
              static_cast<float>(tensors[t].quant.params.front().scale));
        CHECK(record.params.front().second ==
              static_cast<float>(tensors[t].quant.params.front().zero_point));
    }
}

TEST_CASE("serialization is deterministic") {
    const auto tensors = fixture_tensors(7, 4, 128);
    const ArchiveOptions options;
    CHECK(serialize_archive("demo", tensors, options) ==
          serialize_archive("demo", tensors, options));
}

TEST_CASE("duplicate tensor names are rejected before writing") {
    TempDir dir("dup");
    auto tensors = fixture_tensors(3, 8, 128);
    tensors[1].quant.name = tensors[0].quant.name;
    const ArchiveOptions options;
    CHECK_THROWS_WITH_AS(
        write_archive("demo", tensors, options, dir.file("d.etcw")),
        doctest::Contains("duplicate tensor name"), ValidationError);
    CHECK_FALSE(std::filesystem::exists(dir.file("d.etcw")));
}

TEST_CASE("segment totals must match the shape") {
    auto tensors = fixture_tensors(3, 8, 128);
    tensors[0].segments.back().element_count -= 1;
    const ArchiveOptions options;
    CHECK_THROWS_AS(serialize_archive("demo", tensors, options), ValidationError);
}

TEST_CASE("payload corruption is localized to the owning tensor") {
    const auto tensors = fixture_tensors(23, 8, 200);
    const ArchiveOptions options;
    std::vector<std::uint8_t> bytes = serialize_archive("demo", tensors, options);
    const ModelArchive archive = parse_archive(bytes);

    // Flip one byte inside the second tensor's payload slice.
    const std::uint64_t payload_begin = archive.header_bytes;
    const std::uint64_t target = payload_begin + archive.records[1].segments.front().byte_offset;
    bytes[target] ^= 0x40;
    CHECK_THROWS_WITH_AS(parse_archive(bytes), doctest::Contains("'gate'"), CorruptionError);
}

TEST_CASE("record corruption is localized to the owning tensor") {
    const auto tensors = fixture_tensors(29, 8, 200);
    const ArchiveOptions options;
    std::vector<std::uint8_t> bytes = serialize_archive("demo", tensors, options);
    const ModelArchive archive = parse_archive(bytes);
    // A codebook byte inside tensor 0's record: parse may fail its
    // validation (still naming the tensor) or fail its checksum.
    const std::uint64_t target = archive.records[0].record_hash_end - 64;
    bytes[target] ^= 0x01;
    CHECK_THROWS_WITH_AS(parse_archive(bytes), doctest::Contains("tensor 0"), CorruptionError);
}

TEST_CASE("truncation is reported") {
    const auto tensors = fixture_tensors(31, 4, 64);
    const ArchiveOptions options;
    const std::vector<std::uint8_t> bytes = serialize_archive("demo", tensors, options);
    const ModelArchive archive = parse_archive(bytes);
    const std::vector<std::uint8_t> cut(bytes.begin(),
                                        bytes.begin() + archive.header_bytes + 3);
    CHECK_THROWS_WITH_AS(parse_archive(cut), doctest::Contains("truncated payload"),
                         CorruptionError);
}

TEST_CASE("bad magic and version are rejected") {
    const auto tensors = fixture_tensors(37, 4, 64);
    const ArchiveOptions options;
    std::vector<std::uint8_t> bytes = serialize_archive("demo", tensors, options);

    std::vector<std::uint8_t> wrong_magic = bytes;
    wrong_magic[0] = 'X';
    CHECK_THROWS_WITH_AS(parse_archive(wrong_magic), doctest::Contains("bad magic"),
                         CorruptionError);

    std::vector<std::uint8_t> wrong_version = bytes;
    wrong_version[4] = 0x2;
    CHECK_THROWS_WITH_AS(parse_archive(wrong_version), doctest::Contains("version"),
                         CorruptionError);
}

TEST_CASE("trailing checksum corruption is caught") {
    TempDir dir("tail");
    const auto tensors = fixture_tensors(41, 8, 64);
    const ArchiveOptions options;
    std::vector<std::uint8_t> bytes = serialize_archive("demo", tensors, options);
    bytes.back() ^= 0xff;
    write_file(dir.file("bad.etcw"), bytes);
    CHECK_THROWS_WITH_AS(read_archive(dir.file("bad.etcw")),
                         doctest::Contains("archive checksum mismatch"), CorruptionError);
}

TEST_CASE("stats of an incompressible uniform-code tensor") {
    // All 16 codes equally often: entropy is exactly 4 bits.
    FloatTensor tensor;
    tensor.name = "uniform";
    tensor.shape = {16384};
    for (int i = 0; i < 16384; ++i) {
        tensor.values.push_back(static_cast<float>(i % 16));
    }
    const std::vector<CompressedTensor> tensors = {test::compress_one(tensor, 4, 4096)};
    const ArchiveOptions options;
    const ModelArchive archive = parse_archive(serialize_archive("u", tensors, options));
    const ArchiveStats stats = archive_stats(archive);
    CHECK(stats.tensors[0].entropy == 4.0);
    CHECK(stats.tensors[0].avg_code_length == 4.0);
    CHECK(stats.tensors[0].effective_bits == doctest::Approx(4.0).epsilon(1e-3));
    CHECK(stats.tensors[0].bits_saved == doctest::Approx(0.0).epsilon(1e-2));
}

TEST_CASE("stats of a constant tensor hit the one-bit convention") {
    FloatTensor tensor;
    tensor.name = "constant";
    tensor.shape = {8192};
    tensor.values.assign(8192, 0.7f);
    const std::vector<CompressedTensor> tensors = {test::compress_one(tensor, 8, 0x7fffffff)};
    const ArchiveOptions options;
    const ModelArchive archive = parse_archive(serialize_archive("c", tensors, options));
    const ArchiveStats stats = archive_stats(archive);
    CHECK(stats.tensors[0].entropy == 0.0);
    CHECK(stats.tensors[0].avg_code_length == 1.0);
    CHECK(stats.tensors[0].effective_bits == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(stats.tensors[0].bits_saved == doctest::Approx(7.0).epsilon(1e-2));
}

TEST_CASE("gaussian weights compress and respect the entropy bound") {
    const FloatTensor tensor = test::gaussian_tensor("g", 200000, 0.0, 0.02, 43);
    const std::vector<CompressedTensor> tensors = {test::compress_one(tensor, 8, 65536)};
    const ArchiveOptions options;
    const ModelArchive archive = parse_archive(serialize_archive("g", tensors, options));
    const ArchiveStats stats = archive_stats(archive, true);
    const TensorStats& ts = stats.tensors[0];
    CHECK(ts.bits_saved > 0.5);
    // Effective bits sandwiched by the entropy of the actual histogram.
    CHECK(ts.avg_code_length >= ts.entropy);
    CHECK(ts.avg_code_length < ts.entropy + 1.0);
    // Padding makes effective bits only slightly larger than avg_len.
    CHECK(ts.effective_bits >= ts.avg_code_length);
    CHECK(ts.effective_bits == doctest::Approx(ts.avg_code_length).epsilon(0.003));
    CHECK(ts.histogram.size() == 256);
}

TEST_CASE("size accounting reconciles to the byte") {
    const auto tensors = fixture_tensors(47, 8, 100);
    const ArchiveOptions options;
    const std::vector<std::uint8_t> bytes = serialize_archive("demo", tensors, options);
    const ModelArchive archive = parse_archive(bytes);
    const ArchiveStats stats = archive_stats(archive);

    std::uint64_t payload = 0;
    for (const CompressedTensor& tensor : tensors) {
        for (const Segment& segment : tensor.segments) {
            payload += (segment.bit_length + 7) / 8;
        }
    }
    CHECK(bytes.size() == archive.header_bytes + payload + 8);
    CHECK(stats.file_bytes == bytes.size());
    CHECK(stats.payload_bytes == payload);
}

TEST_CASE("effective bits equal average code length plus measured padding") {
    const FloatTensor tensor = test::gaussian_tensor("g", 150000, 0.0, 0.05, 53);
    const std::vector<CompressedTensor> tensors = {test::compress_one(tensor, 8, 8192)};
    const ArchiveOptions options;
    const ModelArchive archive = parse_archive(serialize_archive("g", tensors, options));
    const ArchiveStats stats = archive_stats(archive);
    const TensorStats& ts = stats.tensors[0];

    std::uint64_t pad_bits = 0;
    for (const SegmentEntry& segment : archive.records[0].segments) {
        pad_bits += (8 - segment.bit_length % 8) % 8;
    }
    const double padding_per_symbol = static_cast<double>(pad_bits) / 150000.0;
    CHECK(ts.effective_bits ==
          doctest::Approx(ts.avg_code_length + padding_per_symbol).epsilon(1e-12));
    CHECK(std::abs(ts.effective_bits - ts.avg_code_length) < 0.01);
}

TEST_CASE("full pipeline roundtrip reproduces the in-process dequantization") {
    TempDir dir("pipeline");
    std::mt19937_64 rng(59);
    for (int fuzz = 0; fuzz < 10; ++fuzz) {
        const int bits = fuzz % 2 ? 4 : 8;
        std::vector<SyntheticTensorSpec> specs;
        const int tensor_count = 1 + static_cast<int>(rng() % 4);
        for (int t = 0; t < tensor_count; ++t) {
            const std::uint32_t elements = 100 + static_cast<std::uint32_t>(rng() % 30000);
            specs.push_back({"t" + std::to_string(t),
                             {elements},
                             GaussianSpec{0.0, 0.01 + 0.02 * static_cast<double>(t)}});
        }
        const auto model = generate_synthetic(specs, rng());

        std::vector<CompressedTensor> compressed;
        std::vector<FloatTensor> expected;
        for (const FloatTensor& tensor : model) {
            compressed.push_back(test::compress_one(tensor, bits, 2048));
            expected.push_back(dequantize(compressed.back().quant));
        }
        ArchiveOptions options;
        options.shuffle_seed = rng();
        const auto path = dir.file("f" + std::to_string(fuzz) + ".etcw");
        write_archive("fuzz", compressed, options, path);

        const ModelArchive archive = read_archive(path);
        std::vector<EncodedTensor> views;
        for (std::size_t t = 0; t < archive.records.size(); ++t) {
            views.push_back(encoded_tensor_view(archive, t));
        }
        const DecodePlan plan =
            build_plan(flatten_segments(views), 4, archive.shuffle_seed);
        auto decoded = decode_parallel(views, plan);
        for (std::size_t t = 0; t < archive.records.size(); ++t) {
            QuantTensor quant = quant_tensor_from_record(
                archive, t, std::move(decoded.at(archive.records[t].name)));
            const FloatTensor restored = dequantize(quant);
            REQUIRE(restored.values.size() == expected[t].values.size());
            CHECK(std::memcmp(restored.values.data(), expected[t].values.data(),
                              restored.values.size() * sizeof(float)) == 0);
        }
    }
}

TEST_CASE("blockwise archives carry per-block parameters") {
    const FloatTensor tensor = test::gaussian_tensor("g", 1000, 0.0, 1.0, 61);
    const std::vector<CompressedTensor> tensors = {
        test::compress_one_blockwise(tensor, 4, 32, 512)};
    const ArchiveOptions options;
    const ModelArchive archive = parse_archive(serialize_archive("b", tensors, options));
    CHECK(archive.granularity == Granularity::Block);
    CHECK(archive.block_size == 32);
    REQUIRE(archive.records[0].params.size() == (1000 + 31) / 32);

    auto view = encoded_tensor_view(archive, 0);
    auto decoded = decode_all_serial(std::span<const EncodedTensor>(&view, 1));
    QuantTensor quant = quant_tensor_from_record(archive, 0, std::move(decoded.at("g")));
    const FloatTensor restored = dequantize(quant);
    const FloatTensor expected = dequantize(tensors[0].quant);
    CHECK(std::memcmp(restored.values.data(), expected.values.data(),
                      restored.values.size() * sizeof(float)) == 0);
}

TEST_CASE("mixed bit-widths in one archive are rejected") {
    auto tensors = fixture_tensors(67, 8, 128);
    const FloatTensor other = test::gaussian_tensor("odd", 64, 0.0, 1.0, 68);
    tensors.push_back(test::compress_one(other, 4, 128));
    const ArchiveOptions options;
    CHECK_THROWS_AS(serialize_archive("demo", tensors, options), ValidationError);
}

}  // TEST_SUITE
