#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cli.hpp"

namespace {

void add_quant_flags(CLI::App* cmd, etcw::cli::RunConfig& config) {
    cmd->add_option("--bits", config.bits, "Quantization bit-width")
        ->check(CLI::IsMember({4, 8}));
    cmd->add_option("--scheme", config.scheme, "Quantization scheme")
        ->check(CLI::IsMember({"auto", "unsigned", "asymmetric"}));
    cmd->add_option("--granularity", config.granularity, "Quantization granularity")
        ->check(CLI::IsMember({"tensor", "block"}));
    cmd->add_option("--block-size", config.block_size, "Weights per block (block granularity)");
}

void add_common_flags(CLI::App* cmd, etcw::cli::RunConfig& config) {
    cmd->add_option("--seed", config.seed, "Seed for every stochastic path");
    cmd->add_option("--report", config.report, "Report format")
        ->check(CLI::IsMember({"text", "structured"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"etcw - entropy-coded storage for quantized model weights"};
    app.require_subcommand(1);
    etcw::cli::RunConfig config;

    CLI::App* compress = app.add_subcommand(
        "compress", "Quantize and entropy-code a manifest+blob model into an archive");
    compress->add_option("input", config.input_path, "Input manifest")->required();
    compress->add_option("output", config.output_path, "Output archive")->required();
    add_quant_flags(compress, config);
    add_common_flags(compress, config);
    compress->add_option("--segment-elements", config.segment_elements,
                         "Symbols per decode segment (0 = one segment per tensor)");

    CLI::App* decompress = app.add_subcommand(
        "decompress", "Decode an archive back to a manifest+blob of dequantized weights");
    decompress->add_option("input", config.input_path, "Input archive")->required();
    decompress->add_option("output", config.output_path, "Output manifest")->required();
    decompress->add_option("--blob", config.blob_name, "Output blob file name");
    decompress->add_option("--workers", config.workers,
                           "Decode worker count (0 = ETCW_WORKERS or hardware)");
    add_common_flags(decompress, config);

    CLI::App* verify = app.add_subcommand(
        "verify", "Check an archive against its source model");
    verify->add_option("input", config.input_path, "Source manifest")->required();
    verify->add_option("archive", config.second_path, "Archive to verify")->required();
    add_common_flags(verify, config);

    CLI::App* stats = app.add_subcommand(
        "stats", "Report per-tensor histograms, entropy and effective bit-widths");
    stats->add_option("input", config.input_path, "Archive or manifest")->required();
    add_quant_flags(stats, config);
    add_common_flags(stats, config);
    stats->add_option("--segment-elements", config.segment_elements,
                      "Symbols per decode segment when the input is a manifest");

    CLI::App* bench = app.add_subcommand(
        "bench", "Measure serial vs parallel decode throughput of an archive");
    bench->add_option("input", config.input_path, "Input archive")->required();
    bench->add_option("--worker-sweep", config.worker_sweep, "Worker counts to measure")
        ->delimiter(',');
    bench->add_option("--trials", config.trials, "Trials per measurement");
    add_common_flags(bench, config);

    CLI::App* generate = app.add_subcommand(
        "generate", "Write a synthetic manifest+blob model for experiments");
    generate->add_option("output", config.output_path, "Output manifest")->required();
    generate
        ->add_option("--tensor", config.tensor_specs,
                     "Tensor spec name:shape:distribution, e.g. "
                     "w1:512x512:gaussian(0,0.02); repeatable")
        ->required();
    generate->add_option("--name", config.model_name, "Model name");
    generate->add_option("--blob", config.blob_name, "Blob file name");
    add_common_flags(generate, config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    }

    for (CLI::App* cmd : {compress, decompress, verify, stats, bench, generate}) {
        if (cmd->parsed()) {
            config.command = cmd->get_name();
            break;
        }
    }
    return etcw::cli::run_command(config, std::cout, std::cerr);
}
