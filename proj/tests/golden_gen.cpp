// Writes the three checked-in golden archives under tests/golden/.
// Run manually after any container format change, then refresh the
// frozen digests in test_golden.cpp:
//   cmake --build build --target etcw_golden_gen
//   ./build/tests/etcw_golden_gen tests/golden

#include <cstdio>
#include <filesystem>
#include <vector>

#include "etcw/container.hpp"
#include "etcw/fnv1a.hpp"
#include "etcw/synthetic.hpp"

using namespace etcw;

namespace {

CompressedTensor compress_tensor_level(const FloatTensor& tensor, int bits,
                                       std::uint64_t target) {
    CompressedTensor out;
    out.quant = quantize(tensor, compute_params(tensor, select_scheme(tensor), bits));
    out.codebook = build_codebook(build_histogram(out.quant));
    auto [stream, segments] = segment_tensor(out.quant.codes, out.codebook, target, tensor.name);
    out.bitstream = std::move(stream);
    out.segments = std::move(segments);
    return out;
}

CompressedTensor compress_block_level(const FloatTensor& tensor, int bits,
                                      std::uint32_t block_size, std::uint64_t target) {
    CompressedTensor out;
    out.quant = quantize_blockwise(tensor, bits, block_size);
    out.codebook = build_codebook(build_histogram(out.quant));
    auto [stream, segments] = segment_tensor(out.quant.codes, out.codebook, target, tensor.name);
    out.bitstream = std::move(stream);
    out.segments = std::move(segments);
    return out;
}

std::uint64_t emit(const std::filesystem::path& path, const std::string& model_name,
                   const std::vector<CompressedTensor>& tensors,
                   const ArchiveOptions& options) {
    write_archive(model_name, tensors, options, path);
    const std::vector<std::uint8_t> bytes = [&] {
        std::vector<std::uint8_t> out;
        FILE* f = std::fopen(path.c_str(), "rb");
        int c;
        while ((c = std::fgetc(f)) != EOF) out.push_back(static_cast<std::uint8_t>(c));
        std::fclose(f);
        return out;
    }();
    const std::uint64_t digest = fnv1a64(bytes);
    std::printf("%s  %zu bytes  fnv1a64 0x%016llx\n", path.filename().c_str(), bytes.size(),
                static_cast<unsigned long long>(digest));
    return digest;
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path dir = argc > 1 ? argv[1] : "tests/golden";
    std::filesystem::create_directories(dir);

    {
        const std::vector<SyntheticTensorSpec> specs = {
            {"attn.w", {96, 64}, GaussianSpec{0.0, 0.02}},
            {"gate.w", {1500}, UniformSpec{0.0, 1.0}},
        };
        const auto model = generate_synthetic(specs, 11);
        std::vector<CompressedTensor> tensors;
        for (const auto& t : model) tensors.push_back(compress_tensor_level(t, 8, 4096));
        ArchiveOptions options;
        options.shuffle_seed = 1;
        options.target_elements = 4096;
        emit(dir / "g1_tensor8.etcw", "golden-one", tensors, options);
    }
    {
        const std::vector<SyntheticTensorSpec> specs = {
            {"mlp.w", {64, 48}, GaussianSpec{0.0, 0.05}},
            {"norm.bias", {77}, GaussianOutlierSpec{0.0, 0.01, 0.05, 25.0}},
        };
        auto model = generate_synthetic(specs, 22);
        FloatTensor constant;
        constant.name = "scale.const";
        constant.shape = {40};
        constant.values.assign(40, 0.5f);
        model.push_back(constant);
        std::vector<CompressedTensor> tensors;
        for (const auto& t : model) tensors.push_back(compress_block_level(t, 4, 32, 2048));
        ArchiveOptions options;
        options.shuffle_seed = 7;
        options.target_elements = 2048;
        emit(dir / "g2_block4.etcw", "golden-two", tensors, options);
    }
    {
        const std::vector<SyntheticTensorSpec> specs = {
            {"head.w", {5000}, GaussianSpec{0.01, 0.3}},
            {"emb.w", {60, 50}, UniformSpec{-2.0, 2.0}},
        };
        const auto model = generate_synthetic(specs, 33);
        std::vector<CompressedTensor> tensors;
        for (const auto& t : model) tensors.push_back(compress_tensor_level(t, 4, 500));
        ArchiveOptions options;
        options.shuffle_seed = 99;
        options.target_elements = 500;
        emit(dir / "g3_multiseg4.etcw", "golden-three", tensors, options);
    }
    return 0;
}
