#include "etcw/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "etcw/errors.hpp"

namespace etcw {

namespace {

void check_bits(int bits) {
    if (bits != 4 && bits != 8) {
        throw ValidationError("bits must be 4 or 8, got " + std::to_string(bits));
    }
}

std::pair<float, float> min_max(std::span<const float> values) {
    float lo = values[0];
    float hi = values[0];
    for (float v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return {lo, hi};
}

// Kept out of line: GCC 11 at -O3 drops the inlined narrowing
// round-trip, which must stay observable.
[[gnu::noinline]] double narrow_to_f32(double value) {
    return static_cast<double>(static_cast<float>(value));
}

// Narrow a params pair to what the archive can represent; the codes are
// computed with the full-precision params, everything downstream of the
// codes uses these.
QuantParams recorded_params(const QuantParams& params) {
    QuantParams out = params;
    out.scale = narrow_to_f32(params.scale);
    out.zero_point = narrow_to_f32(params.zero_point);
    return out;
}

void quantize_span(std::span<const float> values, const QuantParams& params,
                   std::span<std::uint8_t> out) {
    const double scale = params.scale;
    const double zero = params.scheme == Scheme::Unsigned ? 0.0 : params.zero_point;
    const double max_code = static_cast<double>((1 << params.bits) - 1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double q = (static_cast<double>(values[i]) - zero) / scale;
        const double rounded = round_half_even(q);
        out[i] = static_cast<std::uint8_t>(std::clamp(rounded, 0.0, max_code));
    }
}

void dequantize_span(std::span<const std::uint8_t> codes, const QuantParams& params,
                     std::span<float> out) {
    const double scale = params.scale;
    const double zero = params.scheme == Scheme::Unsigned ? 0.0 : params.zero_point;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        out[i] = static_cast<float>(static_cast<double>(codes[i]) * scale + zero);
    }
}

}  // namespace

const char* scheme_name(Scheme scheme) {
    return scheme == Scheme::Unsigned ? "unsigned" : "asymmetric";
}

double round_half_even(double x) {
    const double floor_val = std::floor(x);
    const double frac = x - floor_val;
    if (frac < 0.5) return floor_val;
    if (frac > 0.5) return floor_val + 1.0;
    return std::fmod(floor_val, 2.0) == 0.0 ? floor_val : floor_val + 1.0;
}

Scheme select_scheme(std::span<const float> values) {
    if (values.empty()) throw ValidationError("cannot select a scheme for an empty tensor");
    for (float v : values) {
        if (v < 0.0f) return Scheme::Asymmetric;
    }
    return Scheme::Unsigned;
}

Scheme select_scheme(const FloatTensor& tensor) {
    return select_scheme(std::span<const float>(tensor.values));
}

QuantParams compute_params(std::span<const float> values, Scheme scheme, int bits) {
    check_bits(bits);
    if (values.empty()) throw ValidationError("cannot quantize an empty tensor");
    const auto [lo, hi] = min_max(values);
    if (scheme == Scheme::Unsigned && lo < 0.0f) {
        throw ValidationError("unsigned quantization requires non-negative values (min is " +
                              std::to_string(lo) + ")");
    }
    QuantParams params;
    params.bits = bits;
    const double levels = static_cast<double>((1 << bits) - 1);
    if (hi == lo) {
        // Constant tensor: scale 1 keeps dequantization exact with every
        // code at 0. Recorded as asymmetric so zero_point may be nonzero.
        params.scheme = Scheme::Asymmetric;
        params.scale = 1.0;
        params.zero_point = static_cast<double>(lo);
        params.degenerate = true;
        return params;
    }
    params.scheme = scheme;
    if (scheme == Scheme::Unsigned) {
        params.scale = static_cast<double>(hi) / levels;
        params.zero_point = 0.0;
    } else {
        params.scale = (static_cast<double>(hi) - static_cast<double>(lo)) / levels;
        params.zero_point = static_cast<double>(lo);
    }
    return params;
}

QuantParams compute_params(const FloatTensor& tensor, Scheme scheme, int bits) {
    return compute_params(std::span<const float>(tensor.values), scheme, bits);
}

QuantTensor quantize(const FloatTensor& tensor, const QuantParams& params) {
    check_bits(params.bits);
    if (tensor.values.empty()) throw ValidationError("cannot quantize an empty tensor");
    if (!(params.scale > 0.0)) throw ValidationError("scale must be positive");
    QuantTensor quant;
    quant.name = tensor.name;
    quant.shape = tensor.shape;
    quant.granularity = Granularity::Tensor;
    quant.codes.resize(tensor.values.size());
    quantize_span(tensor.values, params, quant.codes);
    quant.params.push_back(recorded_params(params));
    return quant;
}

FloatTensor dequantize(const QuantTensor& quant) {
    FloatTensor tensor;
    tensor.name = quant.name;
    tensor.shape = quant.shape;
    tensor.dtype = Dtype::Float32;
    tensor.values.resize(quant.codes.size());
    if (quant.granularity == Granularity::Tensor) {
        dequantize_span(quant.codes, quant.params.front(), tensor.values);
        return tensor;
    }
    const std::size_t n = quant.codes.size();
    for (std::size_t block = 0; block < quant.params.size(); ++block) {
        const std::size_t begin = block * quant.block_size;
        const std::size_t count = std::min<std::size_t>(quant.block_size, n - begin);
        dequantize_span(std::span<const std::uint8_t>(quant.codes.data() + begin, count),
                        quant.params[block],
                        std::span<float>(tensor.values.data() + begin, count));
    }
    return tensor;
}

QuantTensor quantize_blockwise(const FloatTensor& tensor, int bits, std::uint32_t block_size) {
    check_bits(bits);
    if (block_size < 2) {
        throw ValidationError("block_size must be >= 2, got " + std::to_string(block_size));
    }
    if (tensor.values.empty()) throw ValidationError("cannot quantize an empty tensor");
    QuantTensor quant;
    quant.name = tensor.name;
    quant.shape = tensor.shape;
    quant.granularity = Granularity::Block;
    quant.block_size = block_size;
    const std::size_t n = tensor.values.size();
    quant.codes.resize(n);
    const std::size_t blocks = (n + block_size - 1) / block_size;
    quant.params.reserve(blocks);
    for (std::size_t block = 0; block < blocks; ++block) {
        const std::size_t begin = block * block_size;
        const std::size_t count = std::min<std::size_t>(block_size, n - begin);
        const std::span<const float> slice(tensor.values.data() + begin, count);
        const QuantParams params = compute_params(slice, Scheme::Asymmetric, bits);
        quantize_span(slice, params,
                      std::span<std::uint8_t>(quant.codes.data() + begin, count));
        quant.params.push_back(recorded_params(params));
    }
    return quant;
}

}  // namespace etcw
