#include "etcw/parallel_decode.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

#include "etcw/errors.hpp"

namespace etcw {

namespace {

struct SegmentRef {
    std::uint32_t tensor_index;
    std::uint32_t segment_index;
};

std::span<const std::uint8_t> segment_bytes(const EncodedTensor& tensor, const Segment& segment) {
    const std::uint64_t byte_offset = segment.bit_offset / 8;
    const std::uint64_t byte_count = (segment.bit_length + 7) / 8;
    if (byte_offset + byte_count > tensor.bitstream.payload.size()) {
        throw CorruptionError("segment extends past the tensor payload");
    }
    return {tensor.bitstream.payload.data() + byte_offset, byte_count};
}

}  // namespace

std::uint64_t EncodedTensor::element_count() const {
    std::uint64_t n = 0;
    for (const Segment& segment : segments) n += segment.element_count;
    return n;
}

std::pair<Bitstream, std::vector<Segment>> segment_tensor(std::span<const std::uint8_t> codes,
                                                          const HuffmanCodebook& book,
                                                          std::uint64_t target_elements,
                                                          std::string_view tensor_name) {
    if (target_elements < 1) {
        throw ValidationError("target_elements must be >= 1");
    }
    Bitstream combined;
    std::vector<Segment> segments;
    std::uint64_t element_offset = 0;
    while (element_offset < codes.size()) {
        const std::uint64_t count =
            std::min<std::uint64_t>(target_elements, codes.size() - element_offset);
        Bitstream piece = encode(codes.subspan(element_offset, count), book);
        Segment segment;
        segment.tensor_name = std::string(tensor_name);
        segment.segment_index = static_cast<std::uint32_t>(segments.size());
        segment.element_offset = element_offset;
        segment.element_count = static_cast<std::uint32_t>(count);
        segment.bit_offset = combined.payload.size() * 8;  // byte-aligned start
        segment.bit_length = piece.bit_length;
        combined.payload.insert(combined.payload.end(), piece.payload.begin(),
                                piece.payload.end());
        combined.bit_length += piece.bit_length;
        segments.push_back(std::move(segment));
        element_offset += count;
    }
    return {std::move(combined), std::move(segments)};
}

DecodePlan build_plan(std::span<const Segment> segments, unsigned worker_count,
                      std::uint64_t shuffle_seed) {
    if (worker_count < 1) throw ValidationError("worker_count must be >= 1");
    DecodePlan plan;
    plan.worker_count = worker_count;
    plan.shuffle_seed = shuffle_seed;
    plan.assignment.resize(worker_count);

    std::vector<std::uint32_t> order(segments.size());
    std::iota(order.begin(), order.end(), 0u);
    // Hand-rolled Fisher-Yates: std::shuffle's engine use is not pinned
    // by the standard, and plans must be reproducible across builds.
    std::mt19937_64 rng(shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        plan.assignment[i % worker_count].push_back(order[i]);
    }
    return plan;
}

std::vector<Segment> flatten_segments(std::span<const EncodedTensor> tensors) {
    std::vector<Segment> flat;
    for (const EncodedTensor& tensor : tensors) {
        flat.insert(flat.end(), tensor.segments.begin(), tensor.segments.end());
    }
    return flat;
}

double plan_balance_ratio(const DecodePlan& plan, std::span<const Segment> segments) {
    std::uint64_t lo = ~0ull;
    std::uint64_t hi = 0;
    for (const auto& worker : plan.assignment) {
        std::uint64_t elements = 0;
        for (std::uint32_t index : worker) {
            elements += segments[index].element_count;
        }
        lo = std::min(lo, elements);
        hi = std::max(hi, elements);
    }
    if (lo == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(hi) / static_cast<double>(lo);
}

std::map<std::string, std::vector<std::uint8_t>> decode_all_serial(
    std::span<const EncodedTensor> tensors) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const EncodedTensor& tensor : tensors) {
        const HuffmanDecoder decoder(tensor.codebook);
        std::vector<std::uint8_t> codes(tensor.element_count());
        for (const Segment& segment : tensor.segments) {
            BitReader reader(segment_bytes(tensor, segment), segment.bit_length);
            decoder.decode(reader, std::span<std::uint8_t>(codes.data() + segment.element_offset,
                                                           segment.element_count));
        }
        out.emplace(tensor.name, std::move(codes));
    }
    return out;
}

std::map<std::string, std::vector<std::uint8_t>> decode_parallel(
    std::span<const EncodedTensor> tensors, const DecodePlan& plan) {
    // Resolve plan indices against the flattened segment list and check
    // the plan covers every segment exactly once.
    std::vector<SegmentRef> refs;
    std::size_t total_segments = 0;
    for (std::uint32_t t = 0; t < tensors.size(); ++t) {
        for (std::uint32_t s = 0; s < tensors[t].segments.size(); ++s) {
            refs.push_back({t, s});
        }
        total_segments += tensors[t].segments.size();
    }
    if (plan.assignment.size() != plan.worker_count) {
        throw ValidationError("plan/segment mismatch: worker list count differs");
    }
    std::vector<std::uint8_t> covered(total_segments, 0);
    std::size_t assigned = 0;
    for (const auto& worker : plan.assignment) {
        for (std::uint32_t index : worker) {
            if (index >= total_segments || covered[index]) {
                throw ValidationError("plan/segment mismatch: bad or repeated segment index");
            }
            covered[index] = 1;
            ++assigned;
        }
    }
    if (assigned != total_segments) {
        throw ValidationError("plan/segment mismatch: plan omits segments");
    }

    // Immutable shared inputs; per-tensor outputs sized up front. Every
    // segment writes codes[element_offset, element_offset+count), so
    // worker writes are disjoint by construction and the output path
    // takes no locks.
    std::vector<HuffmanDecoder> decoders;
    decoders.reserve(tensors.size());
    for (const EncodedTensor& tensor : tensors) {
        decoders.emplace_back(tensor.codebook);
    }
    std::vector<std::vector<std::uint8_t>> outputs(tensors.size());
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        outputs[t].resize(tensors[t].element_count());
    }

    std::vector<std::optional<std::string>> failures(total_segments);
    auto run_worker = [&](const std::vector<std::uint32_t>& indices) {
        for (std::uint32_t index : indices) {
            const SegmentRef ref = refs[index];
            const EncodedTensor& tensor = tensors[ref.tensor_index];
            const Segment& segment = tensor.segments[ref.segment_index];
            try {
                if (segment.element_offset + segment.element_count >
                    outputs[ref.tensor_index].size()) {
                    throw CorruptionError("segment exceeds tensor element count");
                }
                BitReader reader(segment_bytes(tensor, segment), segment.bit_length);
                decoders[ref.tensor_index].decode(
                    reader, std::span<std::uint8_t>(
                                outputs[ref.tensor_index].data() + segment.element_offset,
                                segment.element_count));
            } catch (const std::exception& e) {
                failures[index] = e.what();
            }
        }
    };

    if (plan.worker_count == 1) {
        run_worker(plan.assignment[0]);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(plan.worker_count);
        for (unsigned w = 0; w < plan.worker_count; ++w) {
            threads.emplace_back(run_worker, std::cref(plan.assignment[w]));
        }
        for (std::thread& thread : threads) thread.join();
    }

    // First failure in (tensor, segment) order wins; refs are already
    // in that order.
    for (std::size_t index = 0; index < total_segments; ++index) {
        if (failures[index]) {
            const SegmentRef ref = refs[index];
            throw CorruptionError("tensor '" + tensors[ref.tensor_index].name + "' segment " +
                                  std::to_string(ref.segment_index) + ": " + *failures[index]);
        }
    }

    std::map<std::string, std::vector<std::uint8_t>> out;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        out.emplace(tensors[t].name, std::move(outputs[t]));
    }
    return out;
}

}  // namespace etcw
