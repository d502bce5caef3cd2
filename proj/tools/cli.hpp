#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "etcw/container.hpp"
#include "etcw/tensor_store.hpp"

namespace etcw::cli {

// One parsed invocation. Flag combinations are validated before any
// file is touched.
struct RunConfig {
    std::string command;
    std::string input_path;
    std::string second_path;   // verify: the archive
    std::string output_path;
    std::string blob_name;     // decompress/generate blob override
    std::string model_name = "synthetic";
    std::vector<std::string> tensor_specs;  // generate: name:shape:distribution

    int bits = 8;
    std::string scheme = "auto";         // auto | unsigned | asymmetric
    std::string granularity = "tensor";  // tensor | block
    std::uint32_t block_size = 32;
    std::uint64_t segment_elements = 65536;  // 0 = one segment per tensor
    unsigned workers = 0;                    // 0 = env/hardware default
    std::uint64_t seed = 0;
    std::string report = "text";  // text | structured (NDJSON)
    std::vector<unsigned> worker_sweep = {1, 2, 4, 8};
    unsigned trials = 5;
};

void validate_config(const RunConfig& config);

// --workers flag, then ETCW_WORKERS, then hardware concurrency.
unsigned resolve_workers(unsigned flag_value);

// The compression pipeline shared by compress/stats/verify: scheme
// selection, quantization, codebook construction, segmented encoding.
std::vector<CompressedTensor> compress_tensors(std::span<const FloatTensor> tensors,
                                               const RunConfig& config);

// Exit codes: 0 success, 1 validation failure, 2 data corruption,
// 3 internal error. Failures print one machine-parsable line to err:
//   error: <kind>: <message>
int run_compress(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_decompress(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_verify(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_stats(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_bench(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_generate(const RunConfig& config, std::ostream& out, std::ostream& err);

// Dispatch on config.command with uniform error handling.
int run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace etcw::cli
