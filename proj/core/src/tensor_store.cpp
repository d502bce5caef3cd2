#include "etcw/tensor_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "etcw/errors.hpp"

namespace etcw {

namespace {

static_assert(std::endian::native == std::endian::little,
              "blob I/O assumes a little-endian host");

std::vector<std::uint32_t> parse_shape(const std::string& token) {
    if (token.size() < 2 || token.front() != '[' || token.back() != ']') {
        throw ValidationError("malformed shape '" + token + "' (expected e.g. [2,3])");
    }
    std::vector<std::uint32_t> shape;
    const std::string inner = token.substr(1, token.size() - 2);
    if (inner.empty()) return shape;  // rank-0 scalar
    std::stringstream ss(inner);
    std::string dim;
    while (std::getline(ss, dim, ',')) {
        std::size_t pos = 0;
        unsigned long value = 0;
        try {
            value = std::stoul(dim, &pos);
        } catch (const std::exception&) {
            throw ValidationError("malformed shape dimension '" + dim + "'");
        }
        if (pos != dim.size() || value == 0 || value > 0xffffffffull) {
            throw ValidationError("malformed shape dimension '" + dim + "'");
        }
        shape.push_back(static_cast<std::uint32_t>(value));
    }
    return shape;
}

std::string format_shape(std::span<const std::uint32_t> shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(shape[i]);
    }
    out += ']';
    return out;
}

std::uint64_t parse_u64(const std::string& token, const char* what) {
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(token, &pos);
    } catch (const std::exception&) {
        throw ValidationError(std::string("malformed ") + what + " '" + token + "'");
    }
    if (pos != token.size()) {
        throw ValidationError(std::string("malformed ") + what + " '" + token + "'");
    }
    return value;
}

void validate_manifest(ModelManifest& manifest) {
    if (manifest.model_name.empty()) throw ValidationError("manifest is missing model_name");
    if (manifest.blob_file.empty()) throw ValidationError("manifest is missing blob_file");
    std::unordered_set<std::string> seen;
    std::uint64_t prev_end = 0;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < manifest.tensors.size(); ++i) {
        const ManifestEntry& entry = manifest.tensors[i];
        if (entry.name.empty()) throw ValidationError("manifest tensor with empty name");
        if (!seen.insert(entry.name).second) {
            throw ValidationError("duplicate tensor name '" + entry.name + "' in manifest");
        }
        const std::uint64_t elements = shape_elements(entry.shape);
        const std::uint64_t expected_bytes = elements * dtype_size(entry.dtype);
        if (entry.byte_length != expected_bytes) {
            throw ValidationError("tensor '" + entry.name + "': byte length " +
                                  std::to_string(entry.byte_length) + " does not match shape (" +
                                  std::to_string(expected_bytes) + " bytes expected)");
        }
        if (i > 0 && entry.byte_offset < prev_end) {
            throw ValidationError("overlapping tensor regions at '" + entry.name + "'");
        }
        prev_end = entry.byte_offset + entry.byte_length;
        total += elements;
    }
    manifest.total_parameters = total;
}

}  // namespace

ModelManifest read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) {
        throw ValidationError("cannot open manifest '" + manifest_path.string() + "'");
    }
    ModelManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::stringstream ss(line);
        std::vector<std::string> tokens;
        std::string token;
        while (ss >> token) tokens.push_back(token);
        if (tokens.empty()) continue;
        if (tokens[0] == "model_name") {
            if (tokens.size() != 2) {
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": model_name takes one value");
            }
            manifest.model_name = tokens[1];
        } else if (tokens[0] == "blob_file") {
            if (tokens.size() != 2) {
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": blob_file takes one value");
            }
            manifest.blob_file = tokens[1];
        } else {
            if (tokens.size() != 5) {
                throw ValidationError("manifest line " + std::to_string(line_no) +
                                      ": expected 'name shape dtype offset length'");
            }
            ManifestEntry entry;
            entry.name = tokens[0];
            entry.shape = parse_shape(tokens[1]);
            entry.dtype = dtype_from_name(tokens[2]);
            entry.byte_offset = parse_u64(tokens[3], "offset");
            entry.byte_length = parse_u64(tokens[4], "length");
            manifest.tensors.push_back(std::move(entry));
        }
    }
    validate_manifest(manifest);
    return manifest;
}

std::vector<FloatTensor> load_model(const std::filesystem::path& manifest_path) {
    const ModelManifest manifest = read_manifest(manifest_path);
    const std::filesystem::path blob_path = manifest_path.parent_path() / manifest.blob_file;
    std::ifstream blob(blob_path, std::ios::binary);
    if (!blob) {
        throw ValidationError("cannot open blob '" + blob_path.string() + "'");
    }

    std::vector<FloatTensor> tensors;
    tensors.reserve(manifest.tensors.size());
    for (const ManifestEntry& entry : manifest.tensors) {
        FloatTensor tensor;
        tensor.name = entry.name;
        tensor.shape = entry.shape;
        tensor.dtype = entry.dtype;
        const std::uint64_t elements = shape_elements(entry.shape);
        tensor.values.resize(elements);

        blob.seekg(static_cast<std::streamoff>(entry.byte_offset));
        std::vector<char> raw(entry.byte_length);
        blob.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (blob.gcount() != static_cast<std::streamsize>(raw.size())) {
            throw ValidationError("blob '" + blob_path.string() + "' is too short for tensor '" +
                                  entry.name + "'");
        }
        if (entry.dtype == Dtype::Float32) {
            std::memcpy(tensor.values.data(), raw.data(), raw.size());
        } else {
            for (std::uint64_t i = 0; i < elements; ++i) {
                std::uint16_t bits;
                std::memcpy(&bits, raw.data() + i * 2, 2);
                tensor.values[i] = half_to_float(bits);
            }
        }
        for (std::uint64_t i = 0; i < elements; ++i) {
            if (!std::isfinite(tensor.values[i])) {
                throw ValidationError("non-finite value in tensor '" + entry.name +
                                      "' at flat index " + std::to_string(i));
            }
        }
        tensors.push_back(std::move(tensor));
    }
    return tensors;
}

void save_model(const std::string& model_name,
                std::span<const FloatTensor> tensors,
                const std::filesystem::path& manifest_path,
                const std::string& blob_file) {
    if (model_name.empty()) throw ValidationError("model_name must be non-empty");
    std::unordered_set<std::string> seen;
    for (const FloatTensor& tensor : tensors) {
        validate_tensor(tensor);
        if (!seen.insert(tensor.name).second) {
            throw ValidationError("duplicate tensor name '" + tensor.name + "'");
        }
    }

    std::string blob_name = blob_file;
    if (blob_name.empty()) {
        blob_name = manifest_path.stem().string() + ".bin";
    }
    const std::filesystem::path blob_path = manifest_path.parent_path() / blob_name;

    std::ofstream blob(blob_path, std::ios::binary | std::ios::trunc);
    if (!blob) throw ValidationError("cannot write blob '" + blob_path.string() + "'");
    std::ostringstream header;
    header << "model_name " << model_name << "\n";
    header << "blob_file " << blob_name << "\n";

    std::uint64_t offset = 0;
    for (const FloatTensor& tensor : tensors) {
        const std::uint64_t bytes = tensor.element_count() * dtype_size(tensor.dtype);
        if (tensor.dtype == Dtype::Float32) {
            blob.write(reinterpret_cast<const char*>(tensor.values.data()),
                       static_cast<std::streamsize>(bytes));
        } else {
            std::vector<std::uint16_t> halves(tensor.values.size());
            for (std::size_t i = 0; i < tensor.values.size(); ++i) {
                halves[i] = float_to_half(tensor.values[i]);
                if (!std::isfinite(half_to_float(halves[i]))) {
                    throw ValidationError("tensor '" + tensor.name + "' value at flat index " +
                                          std::to_string(i) + " is not representable in float16");
                }
            }
            blob.write(reinterpret_cast<const char*>(halves.data()),
                       static_cast<std::streamsize>(bytes));
        }
        header << tensor.name << ' ' << format_shape(tensor.shape) << ' '
               << dtype_name(tensor.dtype) << ' ' << offset << ' ' << bytes << "\n";
        offset += bytes;
    }
    blob.close();
    if (!blob) throw ValidationError("failed writing blob '" + blob_path.string() + "'");

    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw ValidationError("cannot write manifest '" + manifest_path.string() + "'");
    manifest << header.str();
    manifest.close();
    if (!manifest) {
        throw ValidationError("failed writing manifest '" + manifest_path.string() + "'");
    }
}

}  // namespace etcw
