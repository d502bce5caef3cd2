#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "etcw/tensor.hpp"

namespace etcw {

// Uncompressed model storage: a human-readable manifest plus one raw
// little-endian binary blob.
//
// Manifest format, line-oriented ('#' starts a comment):
//   model_name <name>
//   blob_file <relative path>
//   <tensor> <shape> <dtype> <offset> <length>     one line per tensor
// e.g.
//   model_name demo
//   blob_file demo.bin
//   w1 [2,2] float32 0 16
// The blob is densely packed row-major IEEE 754, little-endian.

struct ManifestEntry {
    std::string name;
    std::vector<std::uint32_t> shape;
    Dtype dtype = Dtype::Float32;
    std::uint64_t byte_offset = 0;
    std::uint64_t byte_length = 0;
};

struct ModelManifest {
    std::string model_name;
    std::string blob_file;
    std::vector<ManifestEntry> tensors;
    std::uint64_t total_parameters = 0;
};

// Parses and validates a manifest: ascending non-overlapping byte
// ranges, byte lengths consistent with shape x dtype size.
ModelManifest read_manifest(const std::filesystem::path& manifest_path);

// Loads all tensors in manifest order. float16 payloads are widened to
// fp32 losslessly. Throws on missing files, malformed manifests, length
// mismatches and non-finite values (reported with tensor name and flat
// index).
std::vector<FloatTensor> load_model(const std::filesystem::path& manifest_path);

// Writes manifest plus blob. Tensors keep their declared dtype: float16
// tensors are narrowed with round-to-nearest-even (values must stay
// finite). blob_file defaults to the manifest stem + ".bin".
void save_model(const std::string& model_name,
                std::span<const FloatTensor> tensors,
                const std::filesystem::path& manifest_path,
                const std::string& blob_file = "");

}  // namespace etcw
