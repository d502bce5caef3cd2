#include <benchmark/benchmark.h>

#include <vector>

#include "etcw/container.hpp"
#include "etcw/parallel_decode.hpp"
#include "etcw/synthetic.hpp"

using namespace etcw;

namespace {

// One shared fixture: 4M gaussian weights quantized at 8 bits, encoded
// in 64Ki-element segments.
struct Fixture {
    std::vector<EncodedTensor> tensors;
    std::vector<Segment> flat;
    QuantTensor quant;
    FloatTensor weights;
    SymbolHistogram hist;

    Fixture() {
        const std::vector<SyntheticTensorSpec> specs = {
            {"a", {1024, 2048}, GaussianSpec{0.0, 0.02}},
            {"b", {1024, 2048}, GaussianSpec{0.0, 0.03}},
        };
        const auto model = generate_synthetic(specs, 1);
        weights = model.front();
        for (const FloatTensor& tensor : model) {
            EncodedTensor encoded;
            encoded.name = tensor.name;
            QuantTensor q = quantize(tensor, compute_params(tensor, select_scheme(tensor), 8));
            encoded.codebook = build_codebook(build_histogram(q));
            auto [stream, segments] =
                segment_tensor(q.codes, encoded.codebook, 65536, tensor.name);
            encoded.bitstream = std::move(stream);
            encoded.segments = std::move(segments);
            if (tensor.name == "a") quant = std::move(q);
            tensors.push_back(std::move(encoded));
        }
        flat = flatten_segments(tensors);
        hist = build_histogram(quant);
    }

    std::uint64_t total_elements() const {
        std::uint64_t n = 0;
        for (const EncodedTensor& tensor : tensors) n += tensor.element_count();
        return n;
    }
};

const Fixture& fixture() {
    static Fixture instance;
    return instance;
}

void BM_Quantize(benchmark::State& state) {
    const Fixture& f = fixture();
    const QuantParams params = compute_params(f.weights, Scheme::Asymmetric, 8);
    for (auto _ : state) {
        QuantTensor q = quantize(f.weights, params);
        benchmark::DoNotOptimize(q.codes.data());
    }
    state.SetItemsProcessed(state.iterations() * f.weights.element_count());
}
BENCHMARK(BM_Quantize)->Unit(benchmark::kMillisecond);

void BM_BuildCodebook(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) {
        HuffmanCodebook book = build_codebook(f.hist);
        benchmark::DoNotOptimize(book.codes.data());
    }
}
BENCHMARK(BM_BuildCodebook);

void BM_Encode(benchmark::State& state) {
    const Fixture& f = fixture();
    const HuffmanCodebook book = build_codebook(f.hist);
    for (auto _ : state) {
        Bitstream stream = encode(f.quant.codes, book);
        benchmark::DoNotOptimize(stream.payload.data());
    }
    state.SetItemsProcessed(state.iterations() * f.quant.codes.size());
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMillisecond);

void BM_DecodeSerial(benchmark::State& state) {
    const Fixture& f = fixture();
    for (auto _ : state) {
        auto decoded = decode_all_serial(f.tensors);
        benchmark::DoNotOptimize(decoded);
    }
    state.SetItemsProcessed(state.iterations() * f.total_elements());
}
BENCHMARK(BM_DecodeSerial)->Unit(benchmark::kMillisecond);

void BM_DecodeParallel(benchmark::State& state) {
    const Fixture& f = fixture();
    const DecodePlan plan =
        build_plan(f.flat, static_cast<unsigned>(state.range(0)), 1);
    for (auto _ : state) {
        auto decoded = decode_parallel(f.tensors, plan);
        benchmark::DoNotOptimize(decoded);
    }
    state.SetItemsProcessed(state.iterations() * f.total_elements());
}
BENCHMARK(BM_DecodeParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
