#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace etcw {

// On-disk element types. Loaded values are always widened to the fp32
// working precision; all downstream math runs in fp32/fp64.
enum class Dtype : std::uint8_t {
    Float32 = 0,
    Float16 = 1,
};

const char* dtype_name(Dtype dtype);
Dtype dtype_from_name(const std::string& name);
std::size_t dtype_size(Dtype dtype);

// Named n-dimensional weight tensor, row-major, finite values only.
struct FloatTensor {
    std::string name;
    std::vector<std::uint32_t> shape;
    Dtype dtype = Dtype::Float32;
    std::vector<float> values;

    std::uint64_t element_count() const;
};

// Product of dimensions; 1 for a rank-0 (scalar) shape.
std::uint64_t shape_elements(std::span<const std::uint32_t> shape);

// Throws ValidationError unless the tensor satisfies its invariants:
// non-empty name without whitespace, positive dims, values.size() equal
// to the shape product, every value finite.
void validate_tensor(const FloatTensor& tensor);

// IEEE 754 binary16 <-> binary32 conversion. Widening is exact;
// narrowing rounds to nearest-even and reports overflow to the caller
// through the returned bits (+-inf).
float half_to_float(std::uint16_t half_bits);
std::uint16_t float_to_half(float value);

}  // namespace etcw
