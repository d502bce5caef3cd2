#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etcw/tensor.hpp"

namespace etcw {

// Uniform quantization grids. Unsigned anchors the grid at zero and
// suits all-non-negative tensors; asymmetric offsets the grid by a
// real-valued zero-point and handles arbitrary ranges.
enum class Scheme : std::uint8_t {
    Unsigned = 0,
    Asymmetric = 1,
};

const char* scheme_name(Scheme scheme);

enum class Granularity : std::uint8_t {
    Tensor = 0,
    Block = 1,
};

struct QuantParams {
    Scheme scheme = Scheme::Asymmetric;
    int bits = 8;              // 4 or 8
    double scale = 1.0;        // > 0
    double zero_point = 0.0;   // fixed at 0 for Scheme::Unsigned
    bool degenerate = false;   // constant input; scale fixed at 1
};

// Integer codes plus the parameters needed to invert them. Tensor
// granularity carries exactly one QuantParams; block granularity one
// per consecutive block of block_size weights (last block may be
// short). Recorded scale/zero_point are f32-representable: quantize()
// narrows them so that dequantizing a decoded archive is bit-identical
// to dequantizing in process.
struct QuantTensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    Granularity granularity = Granularity::Tensor;
    std::uint32_t block_size = 0;  // 0 unless block granularity
    std::vector<QuantParams> params;
    std::vector<std::uint8_t> codes;

    int bits() const { return params.front().bits; }
    std::uint64_t element_count() const { return shape_elements(shape); }
};

// Unsigned when min(values) >= 0, asymmetric otherwise.
// The quantization policy is a deliberate minimal reading of
// per-distribution scheme choice and is replaceable; see README.
Scheme select_scheme(const FloatTensor& tensor);
Scheme select_scheme(std::span<const float> values);

// Unsigned: s = max / (2^b - 1), z = 0.
// Asymmetric: z = min, s = (max - min) / (2^b - 1).
// Constant input (max == min) yields the degenerate convention
// {scheme asymmetric, s = 1, z = min} so every code is 0 and
// dequantization stays exact. Math runs in double precision.
QuantParams compute_params(const FloatTensor& tensor, Scheme scheme, int bits);
QuantParams compute_params(std::span<const float> values, Scheme scheme, int bits);

// code_i = clamp(round_half_even((v_i - z) / s), 0, 2^b - 1).
QuantTensor quantize(const FloatTensor& tensor, const QuantParams& params);

// value_i = code_i * s + z, evaluated per block when block-granular.
FloatTensor dequantize(const QuantTensor& quant);

// Block-based baseline: consecutive blocks of block_size weights each
// get independent asymmetric params. block_size >= 2.
QuantTensor quantize_blockwise(const FloatTensor& tensor, int bits, std::uint32_t block_size);

// Deterministic round-half-to-even, independent of the ambient FP
// rounding mode.
double round_half_even(double x);

}  // namespace etcw
