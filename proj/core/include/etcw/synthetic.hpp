#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "etcw/tensor.hpp"

namespace etcw {

// Synthetic weight generator for desk-scale fixtures. Sampling is fully
// self-contained (mt19937_64 + explicit Box-Muller) so a fixed seed
// reproduces the same stream on every build of this project.

struct GaussianSpec {
    double mean = 0.0;
    double stddev = 1.0;
};

struct UniformSpec {
    double lo = 0.0;
    double hi = 1.0;
};

// Mostly gaussian(mean, stddev); with probability outlier_fraction the
// sample is drawn at stddev * outlier_scale instead.
struct GaussianOutlierSpec {
    double mean = 0.0;
    double stddev = 1.0;
    double outlier_fraction = 0.0;
    double outlier_scale = 1.0;
};

using Distribution = std::variant<GaussianSpec, UniformSpec, GaussianOutlierSpec>;

struct SyntheticTensorSpec {
    std::string name;
    std::vector<std::uint32_t> shape;
    Distribution distribution;
};

// Parses "gaussian(m,s)", "uniform(lo,hi)" or
// "gaussian_outliers(m,s,fraction,scale)".
Distribution parse_distribution(const std::string& text);

// Deterministic for a fixed seed; one RNG stream shared across tensors
// in spec order. All produced values are finite.
std::vector<FloatTensor> generate_synthetic(std::span<const SyntheticTensorSpec> specs,
                                            std::uint64_t seed);

}  // namespace etcw
