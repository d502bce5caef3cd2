#include <random>
#include <set>

#include "doctest.h"

#include "etcw/errors.hpp"
#include "etcw/parallel_decode.hpp"
#include "test_util.hpp"

using namespace etcw;

namespace {

EncodedTensor encode_tensor(const std::string& name, const std::vector<std::uint8_t>& codes,
                            int bits, std::uint64_t target_elements) {
    EncodedTensor tensor;
    tensor.name = name;
    tensor.codebook = build_codebook(build_histogram(codes, bits));
    auto [bitstream, segments] = segment_tensor(codes, tensor.codebook, target_elements, name);
    tensor.bitstream = std::move(bitstream);
    tensor.segments = std::move(segments);
    return tensor;
}

std::vector<std::uint8_t> fuzz_codes(std::mt19937_64& rng, int bits, std::size_t count) {
    std::vector<std::uint8_t> codes(count);
    const int alphabet = 1 << bits;
    const int present = 1 + static_cast<int>(rng() % alphabet);
    for (auto& c : codes) c = static_cast<std::uint8_t>(rng() % present);
    return codes;
}

}  // namespace

TEST_SUITE("parallel_decode") {

TEST_CASE("segmentation is a ceiling split") {
    const std::vector<std::uint8_t> codes = {1, 2, 3, 4, 5, 6, 7, 0, 1, 2};
    const auto [stream, segments] =
        segment_tensor(codes, build_codebook(build_histogram(codes, 4)), 4, "t");
    REQUIRE(segments.size() == 3);
    CHECK(segments[0].element_count == 4);
    CHECK(segments[1].element_count == 4);
    CHECK(segments[2].element_count == 2);
    CHECK(segments[0].element_offset == 0);
    CHECK(segments[1].element_offset == 4);
    CHECK(segments[2].element_offset == 8);
    std::uint64_t bit_total = 0;
    for (const Segment& s : segments) {
        CHECK(s.bit_offset % 8 == 0);  // byte-aligned starts
        bit_total += s.bit_length;
    }
    CHECK(stream.bit_length == bit_total);
    CHECK_THROWS_AS(segment_tensor(codes, build_codebook(build_histogram(codes, 4)), 0, "t"),
                    ValidationError);
}

TEST_CASE("a covering segment is bit-identical to plain encode") {
    std::mt19937_64 rng(3);
    const std::vector<std::uint8_t> codes = fuzz_codes(rng, 8, 1000);
    const HuffmanCodebook book = build_codebook(build_histogram(codes, 8));
    const auto [stream, segments] = segment_tensor(codes, book, 100000, "t");
    const Bitstream plain = encode(codes, book);
    REQUIRE(segments.size() == 1);
    CHECK(stream.payload == plain.payload);
    CHECK(stream.bit_length == plain.bit_length);
}

TEST_CASE("per-segment serial decodes concatenate to the original") {
    std::mt19937_64 rng(5);
    const std::vector<std::uint8_t> codes = fuzz_codes(rng, 4, 100000);
    const EncodedTensor tensor = encode_tensor("t", codes, 4, 4096);
    std::vector<std::uint8_t> rebuilt;
    for (const Segment& segment : tensor.segments) {
        Bitstream piece;
        const std::uint64_t byte_offset = segment.bit_offset / 8;
        const std::uint64_t byte_count = (segment.bit_length + 7) / 8;
        piece.payload.assign(tensor.bitstream.payload.begin() + byte_offset,
                             tensor.bitstream.payload.begin() + byte_offset + byte_count);
        piece.bit_length = segment.bit_length;
        const auto decoded = decode_serial(piece, tensor.codebook, segment.element_count);
        rebuilt.insert(rebuilt.end(), decoded.begin(), decoded.end());
    }
    CHECK(rebuilt == codes);
}

TEST_CASE("segments partition the element space with no overlap") {
    std::mt19937_64 rng(7);
    const std::vector<std::uint8_t> codes = fuzz_codes(rng, 8, 12345);
    const EncodedTensor tensor = encode_tensor("t", codes, 8, 777);
    std::uint64_t cursor = 0;
    for (const Segment& segment : tensor.segments) {
        CHECK(segment.element_offset == cursor);  // disjoint output ranges
        cursor += segment.element_count;
    }
    CHECK(cursor == codes.size());
}

TEST_CASE("plans deal round-robin after a seeded shuffle") {
    std::vector<Segment> segments(8);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        segments[i].tensor_name = "t";
        segments[i].segment_index = static_cast<std::uint32_t>(i);
        segments[i].element_count = 10;
    }

    const DecodePlan one = build_plan(segments, 1, 9);
    REQUIRE(one.assignment.size() == 1);
    CHECK(one.assignment[0].size() == 8);

    const DecodePlan four = build_plan(segments, 4, 9);
    for (const auto& worker : four.assignment) CHECK(worker.size() == 2);

    const DecodePlan again = build_plan(segments, 4, 9);
    CHECK(four.assignment == again.assignment);

    const DecodePlan other = build_plan(segments, 4, 10);
    CHECK(four.assignment != other.assignment);

    // Every segment appears exactly once.
    std::set<std::uint32_t> seen;
    for (const auto& worker : four.assignment) {
        for (std::uint32_t index : worker) CHECK(seen.insert(index).second);
    }
    CHECK(seen.size() == 8);

    CHECK_THROWS_AS(build_plan(segments, 0, 0), ValidationError);
}

TEST_CASE("parallel decode equals serial decode for every worker count") {
    std::mt19937_64 rng(11);
    std::vector<EncodedTensor> tensors;
    for (int t = 0; t < 20; ++t) {
        const int bits = t % 2 ? 4 : 8;
        const std::size_t count = 50 + static_cast<std::size_t>(rng() % 20000);
        const std::uint64_t target = 64 + (rng() % 4096);
        tensors.push_back(
            encode_tensor("t" + std::to_string(t), fuzz_codes(rng, bits, count), bits, target));
    }
    const auto expected = decode_all_serial(tensors);
    const std::vector<Segment> flat = flatten_segments(tensors);
    for (unsigned workers : {1u, 2u, 3u, 8u}) {
        const DecodePlan plan = build_plan(flat, workers, workers * 31u);
        const auto actual = decode_parallel(tensors, plan);
        CHECK(actual == expected);
    }
}

TEST_CASE("worker count and shuffle seed never change the output") {
    std::mt19937_64 rng(13);
    std::vector<EncodedTensor> tensors;
    tensors.push_back(encode_tensor("a", fuzz_codes(rng, 8, 30000), 8, 1024));
    tensors.push_back(encode_tensor("b", fuzz_codes(rng, 8, 10000), 8, 512));
    const std::vector<Segment> flat = flatten_segments(tensors);
    const auto baseline = decode_parallel(tensors, build_plan(flat, 1, 0));
    // Sweep worker counts 1..16 under 100 shuffle seeds.
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const unsigned workers = 1 + static_cast<unsigned>(seed % 16);
        CHECK(decode_parallel(tensors, build_plan(flat, workers, seed)) == baseline);
    }
}

TEST_CASE("a corrupt segment is reported with tensor and segment") {
    std::mt19937_64 rng(17);
    std::vector<EncodedTensor> tensors;
    tensors.push_back(encode_tensor("good", fuzz_codes(rng, 4, 5000), 4, 600));
    tensors.push_back(encode_tensor("evil", fuzz_codes(rng, 4, 5000), 4, 600));

    // Shorten the bit budget of one mid-tensor segment; decoding it must
    // fail while every other segment still decodes.
    REQUIRE(tensors[1].segments.size() > 3);
    tensors[1].segments[2].bit_length -= 3;
    const std::vector<Segment> flat = flatten_segments(tensors);
    const DecodePlan plan = build_plan(flat, 3, 0);
    CHECK_THROWS_WITH_AS(decode_parallel(tensors, plan),
                         doctest::Contains("tensor 'evil' segment 2"), CorruptionError);
}

TEST_CASE("plan and segment lists must agree") {
    std::mt19937_64 rng(19);
    std::vector<EncodedTensor> tensors;
    tensors.push_back(encode_tensor("a", fuzz_codes(rng, 4, 1000), 4, 100));
    const std::vector<Segment> flat = flatten_segments(tensors);

    DecodePlan missing = build_plan(flat, 2, 0);
    missing.assignment[0].pop_back();
    CHECK_THROWS_WITH_AS(decode_parallel(tensors, missing), doctest::Contains("mismatch"),
                         ValidationError);

    DecodePlan duplicated = build_plan(flat, 2, 0);
    duplicated.assignment[0].push_back(duplicated.assignment[1][0]);
    CHECK_THROWS_WITH_AS(decode_parallel(tensors, duplicated), doctest::Contains("mismatch"),
                         ValidationError);
}

TEST_CASE("shuffled dealing balances uniform segments") {
    // 64 segments of equal cost over 4 workers: max/min elements below
    // 1.5 (soft target; reported here, asserted loosely).
    std::vector<Segment> segments(64);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        segments[i].segment_index = static_cast<std::uint32_t>(i);
        segments[i].element_count = 4096;
    }
    const DecodePlan plan = build_plan(segments, 4, 1234);
    const double ratio = plan_balance_ratio(plan, segments);
    MESSAGE("balance ratio over 64 uniform segments, 4 workers: ", ratio);
    CHECK(ratio == 1.0);  // divisible round-robin is exactly even

    segments.resize(67);
    for (std::size_t i = 64; i < 67; ++i) segments[i].element_count = 4096;
    const double uneven =
        plan_balance_ratio(build_plan(segments, 4, 1234), segments);
    MESSAGE("balance ratio over 67 uniform segments, 4 workers: ", uneven);
}

}  // TEST_SUITE
