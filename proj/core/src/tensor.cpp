#include "etcw/tensor.hpp"

#include <cctype>
#include <cmath>
#include <cstring>

#include "etcw/errors.hpp"

namespace etcw {

const char* dtype_name(Dtype dtype) {
    switch (dtype) {
        case Dtype::Float32: return "float32";
        case Dtype::Float16: return "float16";
    }
    throw InternalError("unknown dtype tag");
}

Dtype dtype_from_name(const std::string& name) {
    if (name == "float32") return Dtype::Float32;
    if (name == "float16") return Dtype::Float16;
    throw ValidationError("unknown dtype '" + name + "' (expected float32 or float16)");
}

std::size_t dtype_size(Dtype dtype) {
    return dtype == Dtype::Float32 ? 4 : 2;
}

std::uint64_t shape_elements(std::span<const std::uint32_t> shape) {
    std::uint64_t n = 1;
    for (std::uint32_t dim : shape) n *= dim;
    return n;
}

std::uint64_t FloatTensor::element_count() const {
    return shape_elements(shape);
}

void validate_tensor(const FloatTensor& tensor) {
    if (tensor.name.empty()) {
        throw ValidationError("tensor has an empty name");
    }
    for (char c : tensor.name) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            throw ValidationError("tensor name '" + tensor.name + "' contains whitespace");
        }
    }
    for (std::uint32_t dim : tensor.shape) {
        if (dim == 0) {
            throw ValidationError("tensor '" + tensor.name + "' has a zero dimension");
        }
    }
    const std::uint64_t expected = shape_elements(tensor.shape);
    if (tensor.values.size() != expected) {
        throw ValidationError("tensor '" + tensor.name + "' has " +
                              std::to_string(tensor.values.size()) + " values but shape implies " +
                              std::to_string(expected));
    }
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
        if (!std::isfinite(tensor.values[i])) {
            throw ValidationError("non-finite value in tensor '" + tensor.name +
                                  "' at flat index " + std::to_string(i));
        }
    }
}

float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
    std::uint32_t exponent = (h >> 10) & 0x1fu;
    std::uint32_t mantissa = h & 0x3ffu;
    std::uint32_t bits;
    if (exponent == 0) {
        if (mantissa == 0) {
            bits = sign;
        } else {
            // Subnormal half: renormalize into the float range.
            int shift = 0;
            while (!(mantissa & 0x400u)) {
                mantissa <<= 1;
                ++shift;
            }
            mantissa &= 0x3ffu;
            bits = sign | ((113u - shift) << 23) | (mantissa << 13);
        }
    } else if (exponent == 31) {
        bits = sign | 0x7f800000u | (mantissa << 13);
    } else {
        bits = sign | ((exponent + 112u) << 23) | (mantissa << 13);
    }
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

std::uint16_t float_to_half(float value) {
    std::uint32_t x;
    std::memcpy(&x, &value, sizeof(x));
    const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
    const std::uint32_t exponent = (x >> 23) & 0xffu;
    std::uint32_t mantissa = x & 0x7fffffu;

    if (exponent == 0xffu) {
        // Inf stays inf; NaN keeps a payload bit so it stays NaN.
        return static_cast<std::uint16_t>(sign | 0x7c00u | (mantissa ? 0x200u : 0u));
    }
    const int half_exp = static_cast<int>(exponent) - 127 + 15;
    if (half_exp >= 31) {
        return static_cast<std::uint16_t>(sign | 0x7c00u);  // overflow -> inf
    }
    if (half_exp <= 0) {
        if (half_exp < -10) {
            return sign;  // underflow -> signed zero
        }
        mantissa |= 0x800000u;
        const std::uint32_t shift = static_cast<std::uint32_t>(14 - half_exp);
        std::uint32_t half_man = mantissa >> shift;
        const std::uint32_t rem = mantissa & ((1u << shift) - 1u);
        const std::uint32_t halfway = 1u << (shift - 1);
        if (rem > halfway || (rem == halfway && (half_man & 1u))) ++half_man;
        return static_cast<std::uint16_t>(sign | half_man);
    }
    std::uint16_t out = static_cast<std::uint16_t>(
        sign | (static_cast<std::uint32_t>(half_exp) << 10) | (mantissa >> 13));
    const std::uint32_t rem = mantissa & 0x1fffu;
    if (rem > 0x1000u || (rem == 0x1000u && (out & 1u))) {
        ++out;  // a carry into the exponent is the correctly rounded result
    }
    return out;
}

}  // namespace etcw
