#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "etcw/errors.hpp"
#include "etcw/synthetic.hpp"

namespace etcw::cli {

namespace {

using nlohmann::json;

constexpr double kFloat16Bits = 16.0;

Scheme parse_scheme(const std::string& name) {
    if (name == "unsigned") return Scheme::Unsigned;
    if (name == "asymmetric") return Scheme::Asymmetric;
    throw ValidationError("unknown scheme '" + name + "'");
}

bool is_archive_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    char magic[4] = {};
    in.read(magic, 4);
    return in.gcount() == 4 && std::memcmp(magic, kArchiveMagic, 4) == 0;
}

double median(std::vector<double> samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

void print_stats_text(const ArchiveStats& stats, const std::string& model_name, int bits,
                      const std::string& granularity, std::ostream& out) {
    out << "model " << model_name << ": " << stats.tensors.size() << " tensors, "
        << stats.total_elements << " parameters, bits=" << bits
        << ", granularity=" << granularity << "\n";
    out << std::left << std::setw(24) << "tensor" << std::right << std::setw(12) << "elements"
        << std::setw(12) << "scheme" << std::setw(10) << "entropy" << std::setw(10) << "avg_len"
        << std::setw(10) << "eff_bits" << std::setw(10) << "saved" << std::setw(10) << "segs"
        << "\n";
    out << std::fixed << std::setprecision(3);
    for (const TensorStats& ts : stats.tensors) {
        out << std::left << std::setw(24) << ts.name << std::right << std::setw(12) << ts.elements
            << std::setw(12) << scheme_name(ts.scheme) << std::setw(10) << ts.entropy
            << std::setw(10) << ts.avg_code_length << std::setw(10) << ts.effective_bits
            << std::setw(10) << ts.bits_saved << std::setw(10) << ts.segment_count << "\n";
    }
    out << "model: effective " << stats.effective_bits << " bits/weight, bits_saved "
        << stats.bits_saved << ", ratio vs fp16 " << std::setprecision(2)
        << stats.compression_ratio_fp16 << "x, header overhead " << std::setprecision(4)
        << (100.0 * stats.header_overhead) << "%\n";
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);
}

void print_stats_json(const ArchiveStats& stats, const std::string& model_name, int bits,
                      const std::string& granularity, bool histograms, std::ostream& out) {
    json model = {
        {"record", "archive"},
        {"model", model_name},
        {"bits", bits},
        {"granularity", granularity},
        {"tensors", stats.tensors.size()},
        {"parameters", stats.total_elements},
        {"file_bytes", stats.file_bytes},
        {"header_bytes", stats.header_bytes},
        {"payload_bytes", stats.payload_bytes},
        {"effective_bits", stats.effective_bits},
        {"avg_code_length", stats.avg_code_length},
        {"bits_saved", stats.bits_saved},
        {"compression_ratio_fp16", stats.compression_ratio_fp16},
        {"header_overhead", stats.header_overhead},
    };
    out << model.dump() << "\n";
    for (const TensorStats& ts : stats.tensors) {
        json tensor = {
            {"record", "tensor"},
            {"name", ts.name},
            {"elements", ts.elements},
            {"bits", ts.bits},
            {"scheme", scheme_name(ts.scheme)},
            {"segments", ts.segment_count},
            {"payload_bytes", ts.payload_bytes},
            {"record_bytes", ts.record_bytes},
            {"entropy", ts.entropy},
            {"avg_code_length", ts.avg_code_length},
            {"effective_bits", ts.effective_bits},
            {"bits_saved", ts.bits_saved},
            {"compression_ratio_fp16", ts.compression_ratio_fp16},
            {"header_overhead", ts.header_overhead},
        };
        if (histograms) tensor["histogram"] = ts.histogram;
        out << tensor.dump() << "\n";
    }
}

void report_archive_stats(const ModelArchive& archive, const RunConfig& config,
                          std::ostream& out) {
    const bool structured = config.report == "structured";
    const ArchiveStats stats = archive_stats(archive, structured);
    const std::string granularity =
        archive.granularity == Granularity::Block ? "block" : "tensor";
    if (structured) {
        print_stats_json(stats, archive.model_name, archive.bits, granularity, true, out);
    } else {
        print_stats_text(stats, archive.model_name, archive.bits, granularity, out);
    }
}

}  // namespace

void validate_config(const RunConfig& config) {
    if (config.bits != 4 && config.bits != 8) {
        throw ValidationError("--bits must be 4 or 8");
    }
    if (config.scheme != "auto" && config.scheme != "unsigned" &&
        config.scheme != "asymmetric") {
        throw ValidationError("--scheme must be auto, unsigned or asymmetric");
    }
    if (config.granularity != "tensor" && config.granularity != "block") {
        throw ValidationError("--granularity must be tensor or block");
    }
    if (config.granularity == "block") {
        if (config.block_size < 2) {
            throw ValidationError("--block-size must be >= 2");
        }
        if (config.scheme == "unsigned") {
            throw ValidationError("block granularity always quantizes asymmetrically; "
                                  "--scheme unsigned is not supported with it");
        }
    }
    if (config.report != "text" && config.report != "structured") {
        throw ValidationError("--report must be text or structured");
    }
    if (config.trials < 1) throw ValidationError("--trials must be >= 1");
    if (config.worker_sweep.empty()) {
        throw ValidationError("--worker-sweep must name at least one worker count");
    }
    for (unsigned w : config.worker_sweep) {
        if (w < 1) throw ValidationError("worker counts must be >= 1");
    }
}

unsigned resolve_workers(unsigned flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("ETCW_WORKERS")) {
        try {
            const unsigned long parsed = std::stoul(env);
            if (parsed >= 1) return static_cast<unsigned>(parsed);
        } catch (const std::exception&) {
            throw ValidationError("ETCW_WORKERS is not a positive integer");
        }
        throw ValidationError("ETCW_WORKERS is not a positive integer");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

std::vector<CompressedTensor> compress_tensors(std::span<const FloatTensor> tensors,
                                               const RunConfig& config) {
    std::vector<CompressedTensor> out;
    out.reserve(tensors.size());
    for (const FloatTensor& tensor : tensors) {
        CompressedTensor compressed;
        if (config.granularity == "block") {
            compressed.quant = quantize_blockwise(tensor, config.bits, config.block_size);
        } else {
            Scheme scheme;
            if (config.scheme == "auto") {
                scheme = select_scheme(tensor);
            } else {
                scheme = parse_scheme(config.scheme);
                if (scheme == Scheme::Unsigned) {
                    for (float v : tensor.values) {
                        if (v < 0.0f) {
                            throw ValidationError("tensor '" + tensor.name +
                                                  "' has negative weights; unsigned "
                                                  "quantization is not applicable");
                        }
                    }
                }
            }
            const QuantParams params = compute_params(tensor, scheme, config.bits);
            compressed.quant = quantize(tensor, params);
        }
        const SymbolHistogram hist = build_histogram(compressed.quant);
        compressed.codebook = build_codebook(hist);
        const std::uint64_t target = config.segment_elements == 0
                                         ? compressed.quant.element_count()
                                         : config.segment_elements;
        auto [bitstream, segments] =
            segment_tensor(compressed.quant.codes, compressed.codebook, target,
                           compressed.quant.name);
        compressed.bitstream = std::move(bitstream);
        compressed.segments = std::move(segments);
        out.push_back(std::move(compressed));
    }
    return out;
}

int run_compress(const RunConfig& config, std::ostream& out, std::ostream&) {
    validate_config(config);
    const std::vector<FloatTensor> tensors = load_model(config.input_path);
    ModelManifest manifest = read_manifest(config.input_path);

    const std::vector<CompressedTensor> compressed = compress_tensors(tensors, config);
    ArchiveOptions options;
    options.shuffle_seed = config.seed;
    options.target_elements = static_cast<std::uint32_t>(config.segment_elements);
    write_archive(manifest.model_name, compressed, options, config.output_path);

    const ModelArchive archive = read_archive(config.output_path);
    report_archive_stats(archive, config, out);
    return 0;
}

int run_decompress(const RunConfig& config, std::ostream& out, std::ostream&) {
    validate_config(config);
    const ModelArchive archive = read_archive(config.input_path);

    std::vector<EncodedTensor> views;
    views.reserve(archive.records.size());
    for (std::size_t t = 0; t < archive.records.size(); ++t) {
        views.push_back(encoded_tensor_view(archive, t));
    }
    const unsigned workers = resolve_workers(config.workers);
    const DecodePlan plan =
        build_plan(flatten_segments(views), workers, archive.shuffle_seed);
    auto decoded = decode_parallel(views, plan);

    std::vector<FloatTensor> tensors;
    tensors.reserve(archive.records.size());
    for (std::size_t t = 0; t < archive.records.size(); ++t) {
        QuantTensor quant = quant_tensor_from_record(
            archive, t, std::move(decoded.at(archive.records[t].name)));
        tensors.push_back(dequantize(quant));
    }
    save_model(archive.model_name, tensors, config.output_path, config.blob_name);
    if (config.report == "structured") {
        out << json{{"record", "decompress"},
                    {"model", archive.model_name},
                    {"tensors", tensors.size()},
                    {"workers", workers}}
                   .dump()
            << "\n";
    } else {
        out << "decompressed " << tensors.size() << " tensors of model '"
            << archive.model_name << "' to " << config.output_path << "\n";
    }
    return 0;
}

int run_verify(const RunConfig& config, std::ostream& out, std::ostream&) {
    validate_config(config);
    const std::vector<FloatTensor> original = load_model(config.input_path);
    const ModelArchive archive = read_archive(config.second_path);
    const bool structured = config.report == "structured";

    std::vector<std::string> violations;
    if (original.size() != archive.records.size()) {
        violations.push_back("tensor count differs (" + std::to_string(original.size()) +
                             " vs " + std::to_string(archive.records.size()) + ")");
        for (const TensorRecord& record : archive.records) violations.push_back(record.name);
    } else {
        for (std::size_t t = 0; t < original.size(); ++t) {
            const TensorRecord& record = archive.records[t];
            const FloatTensor& tensor = original[t];
            if (record.name != tensor.name || record.shape != tensor.shape) {
                violations.push_back(record.name);
                continue;
            }

            EncodedTensor view = encoded_tensor_view(archive, t);
            std::vector<std::uint8_t> decoded(view.element_count());
            const HuffmanDecoder decoder(view.codebook);
            for (const Segment& segment : view.segments) {
                BitReader reader(
                    std::span<const std::uint8_t>(view.bitstream.payload)
                        .subspan(segment.bit_offset / 8, (segment.bit_length + 7) / 8),
                    segment.bit_length);
                decoder.decode(reader,
                               std::span<std::uint8_t>(decoded.data() + segment.element_offset,
                                                       segment.element_count));
            }

            // Entropy layer is lossless iff decoding reproduces a fresh
            // quantization of the source.
            QuantTensor requant;
            if (archive.granularity == Granularity::Block) {
                requant = quantize_blockwise(tensor, archive.bits, archive.block_size);
            } else {
                const QuantParams params = compute_params(tensor, record.scheme, archive.bits);
                requant = quantize(tensor, params);
            }
            const bool codes_match = requant.codes == decoded;

            QuantTensor stored = quant_tensor_from_record(archive, t, std::move(decoded));
            const FloatTensor restored = dequantize(stored);
            double max_error = 0.0;
            double bound = 0.0;
            for (const QuantParams& params : stored.params) {
                bound = std::max(bound, params.scale / 2.0);
            }
            bound += 4.0 * static_cast<double>(std::numeric_limits<float>::epsilon()) *
                     (1.0 + bound * static_cast<double>((1 << archive.bits) - 1));
            for (std::size_t i = 0; i < tensor.values.size(); ++i) {
                max_error = std::max(
                    max_error, std::abs(static_cast<double>(restored.values[i]) -
                                        static_cast<double>(tensor.values[i])));
            }
            const bool error_ok = max_error <= bound;
            if (!codes_match || !error_ok) violations.push_back(record.name);
            if (structured) {
                out << json{{"record", "verify"},
                            {"tensor", record.name},
                            {"codes_match", codes_match},
                            {"max_abs_error", max_error},
                            {"bound", bound},
                            {"status", codes_match && error_ok ? "pass" : "fail"}}
                           .dump()
                    << "\n";
            } else {
                out << "tensor " << record.name << ": codes "
                    << (codes_match ? "match" : "MISMATCH") << ", max error " << max_error
                    << " (bound " << bound << ")\n";
            }
        }
    }

    if (violations.empty()) {
        if (structured) {
            out << json{{"record", "verify_summary"}, {"status", "pass"}}.dump() << "\n";
        } else {
            out << "verify: pass\n";
        }
        return 0;
    }
    if (structured) {
        out << json{{"record", "verify_summary"},
                    {"status", "fail"},
                    {"violations", violations}}
                   .dump()
            << "\n";
    } else {
        out << "verify: FAIL (";
        for (std::size_t i = 0; i < violations.size(); ++i) {
            if (i) out << ", ";
            out << violations[i];
        }
        out << ")\n";
    }
    return 1;
}

int run_stats(const RunConfig& config, std::ostream& out, std::ostream&) {
    validate_config(config);
    if (is_archive_file(config.input_path)) {
        const ModelArchive archive = read_archive(config.input_path);
        report_archive_stats(archive, config, out);
        return 0;
    }
    // Manifest input: report what compression at the current flags
    // would produce, without writing an archive.
    const std::vector<FloatTensor> tensors = load_model(config.input_path);
    const ModelManifest manifest = read_manifest(config.input_path);
    const std::vector<CompressedTensor> compressed = compress_tensors(tensors, config);
    ArchiveOptions options;
    options.shuffle_seed = config.seed;
    options.target_elements = static_cast<std::uint32_t>(config.segment_elements);
    const std::vector<std::uint8_t> bytes =
        serialize_archive(manifest.model_name, compressed, options);
    const ModelArchive archive = parse_archive(bytes);
    report_archive_stats(archive, config, out);
    return 0;
}

int run_bench(const RunConfig& config, std::ostream& out, std::ostream&) {
    validate_config(config);
    const ModelArchive archive = read_archive(config.input_path);

    std::vector<EncodedTensor> views;
    views.reserve(archive.records.size());
    std::uint64_t total_elements = 0;
    for (std::size_t t = 0; t < archive.records.size(); ++t) {
        views.push_back(encoded_tensor_view(archive, t));
        total_elements += views.back().element_count();
    }
    const bool structured = config.report == "structured";
    if (total_elements < 10000) {
        const char* warning = "archive is tiny; timings will be noise-dominated";
        if (structured) {
            out << json{{"record", "warning"}, {"message", warning}}.dump() << "\n";
        } else {
            out << "warning: " << warning << "\n";
        }
    }

    const std::vector<Segment> flat = flatten_segments(views);
    const auto time_once = [&](auto&& fn) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        const auto stop = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(stop - start).count();
    };

    std::vector<double> serial_samples;
    for (unsigned trial = 0; trial < config.trials; ++trial) {
        serial_samples.push_back(time_once([&] { decode_all_serial(views); }));
    }
    const double serial_median = median(serial_samples);
    if (structured) {
        out << json{{"record", "bench"},
                    {"mode", "serial"},
                    {"workers", 1},
                    {"elements", total_elements},
                    {"samples_ms", serial_samples},
                    {"median_ms", serial_median},
                    {"speedup", 1.0},
                    {"code_mb_per_s",
                     total_elements / (serial_median * 1e3)}}
                   .dump()
            << "\n";
    } else {
        out << std::fixed << std::setprecision(2);
        out << "serial decode: median " << serial_median << " ms over " << config.trials
            << " trials (samples:";
        for (double s : serial_samples) out << " " << s;
        out << ")\n";
    }

    for (unsigned workers : config.worker_sweep) {
        const DecodePlan plan = build_plan(flat, workers, config.seed);
        std::vector<double> samples;
        for (unsigned trial = 0; trial < config.trials; ++trial) {
            samples.push_back(time_once([&] { decode_parallel(views, plan); }));
        }
        const double med = median(samples);
        const double balance = plan_balance_ratio(plan, flat);
        if (structured) {
            out << json{{"record", "bench"},
                        {"mode", "parallel"},
                        {"workers", workers},
                        {"elements", total_elements},
                        {"samples_ms", samples},
                        {"median_ms", med},
                        {"speedup", serial_median / med},
                        {"balance_ratio", balance},
                        {"code_mb_per_s", total_elements / (med * 1e3)}}
                       .dump()
                << "\n";
        } else {
            out << "parallel decode x" << workers << ": median " << med << " ms, speedup "
                << (serial_median / med) << "x, balance " << balance << " (samples:";
            for (double s : samples) out << " " << s;
            out << ")\n";
        }
    }
    if (!structured) {
        out.unsetf(std::ios::fixed);
        out << std::setprecision(6);
    }
    return 0;
}

int run_generate(const RunConfig& config, std::ostream& out, std::ostream&) {
    validate_config(config);
    if (config.tensor_specs.empty()) {
        throw ValidationError("generate requires at least one --tensor spec");
    }
    std::vector<SyntheticTensorSpec> specs;
    specs.reserve(config.tensor_specs.size());
    for (const std::string& text : config.tensor_specs) {
        // name:AxBxC:distribution(args)
        const std::size_t first = text.find(':');
        const std::size_t second = text.find(':', first + 1);
        if (first == std::string::npos || second == std::string::npos) {
            throw ValidationError("malformed --tensor '" + text +
                                  "' (expected name:shape:distribution)");
        }
        SyntheticTensorSpec spec;
        spec.name = text.substr(0, first);
        const std::string shape_text = text.substr(first + 1, second - first - 1);
        std::stringstream ss(shape_text);
        std::string dim;
        while (std::getline(ss, dim, 'x')) {
            try {
                std::size_t pos = 0;
                const unsigned long value = std::stoul(dim, &pos);
                if (pos != dim.size() || value == 0) throw std::invalid_argument(dim);
                spec.shape.push_back(static_cast<std::uint32_t>(value));
            } catch (const std::exception&) {
                throw ValidationError("malformed shape dimension '" + dim + "' in '" + text +
                                      "'");
            }
        }
        spec.distribution = parse_distribution(text.substr(second + 1));
        specs.push_back(std::move(spec));
    }
    const std::vector<FloatTensor> tensors = generate_synthetic(specs, config.seed);
    save_model(config.model_name, tensors, config.output_path, config.blob_name);
    std::uint64_t parameters = 0;
    for (const FloatTensor& tensor : tensors) parameters += tensor.element_count();
    if (config.report == "structured") {
        out << json{{"record", "generate"},
                    {"model", config.model_name},
                    {"tensors", tensors.size()},
                    {"parameters", parameters},
                    {"seed", config.seed}}
                   .dump()
            << "\n";
    } else {
        out << "generated " << tensors.size() << " tensors (" << parameters
            << " parameters), seed " << config.seed << "\n";
    }
    return 0;
}

int run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        if (config.command == "compress") return run_compress(config, out, err);
        if (config.command == "decompress") return run_decompress(config, out, err);
        if (config.command == "verify") return run_verify(config, out, err);
        if (config.command == "stats") return run_stats(config, out, err);
        if (config.command == "bench") return run_bench(config, out, err);
        if (config.command == "generate") return run_generate(config, out, err);
        throw ValidationError("unknown command '" + config.command + "'");
    } catch (const Error& e) {
        const char* kind = e.kind() == ErrorKind::Validation ? "validation"
                           : e.kind() == ErrorKind::Corruption ? "corruption"
                                                               : "internal";
        err << "error: " << kind << ": " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace etcw::cli
