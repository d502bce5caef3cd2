#include "etcw/synthetic.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "etcw/errors.hpp"

namespace etcw {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// std::*_distribution output is not pinned by the standard, so the
// sampling arithmetic is spelled out here to keep fixtures stable.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : engine_(seed) {}

    // Uniform in (0, 1]; never 0 so log() below stays finite.
    double uniform_pos() {
        return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

private:
    std::mt19937_64 engine_;
};

void validate_spec(const SyntheticTensorSpec& spec) {
    if (const auto* g = std::get_if<GaussianSpec>(&spec.distribution)) {
        if (!(g->stddev > 0.0)) {
            throw ValidationError("tensor '" + spec.name + "': stddev must be positive");
        }
    } else if (const auto* u = std::get_if<UniformSpec>(&spec.distribution)) {
        if (!(u->lo <= u->hi)) {
            throw ValidationError("tensor '" + spec.name + "': uniform requires lo <= hi");
        }
    } else if (const auto* o = std::get_if<GaussianOutlierSpec>(&spec.distribution)) {
        if (!(o->stddev > 0.0)) {
            throw ValidationError("tensor '" + spec.name + "': stddev must be positive");
        }
        if (o->outlier_fraction < 0.0 || o->outlier_fraction > 1.0) {
            throw ValidationError("tensor '" + spec.name +
                                  "': outlier_fraction must be in [0, 1]");
        }
    }
}

std::vector<double> parse_args(const std::string& text, std::size_t open) {
    if (text.back() != ')') {
        throw ValidationError("malformed distribution '" + text + "'");
    }
    std::vector<double> args;
    std::stringstream ss(text.substr(open + 1, text.size() - open - 2));
    std::string token;
    while (std::getline(ss, token, ',')) {
        try {
            std::size_t pos = 0;
            args.push_back(std::stod(token, &pos));
            if (pos != token.size()) throw std::invalid_argument(token);
        } catch (const std::exception&) {
            throw ValidationError("malformed distribution argument '" + token + "'");
        }
    }
    return args;
}

}  // namespace

Distribution parse_distribution(const std::string& text) {
    const std::size_t open = text.find('(');
    if (open == std::string::npos) {
        throw ValidationError("malformed distribution '" + text + "'");
    }
    const std::string kind = text.substr(0, open);
    const std::vector<double> args = parse_args(text, open);
    if (kind == "gaussian") {
        if (args.size() != 2) throw ValidationError("gaussian takes (mean, stddev)");
        return GaussianSpec{args[0], args[1]};
    }
    if (kind == "uniform") {
        if (args.size() != 2) throw ValidationError("uniform takes (lo, hi)");
        return UniformSpec{args[0], args[1]};
    }
    if (kind == "gaussian_outliers") {
        if (args.size() != 4) {
            throw ValidationError(
                "gaussian_outliers takes (mean, stddev, outlier_fraction, outlier_scale)");
        }
        return GaussianOutlierSpec{args[0], args[1], args[2], args[3]};
    }
    throw ValidationError("unknown distribution '" + kind + "'");
}

std::vector<FloatTensor> generate_synthetic(std::span<const SyntheticTensorSpec> specs,
                                            std::uint64_t seed) {
    for (const SyntheticTensorSpec& spec : specs) validate_spec(spec);

    Sampler sampler(seed);
    std::vector<FloatTensor> tensors;
    tensors.reserve(specs.size());
    for (const SyntheticTensorSpec& spec : specs) {
        FloatTensor tensor;
        tensor.name = spec.name;
        tensor.shape = spec.shape;
        tensor.dtype = Dtype::Float32;
        const std::uint64_t elements = shape_elements(spec.shape);
        tensor.values.resize(elements);
        if (const auto* g = std::get_if<GaussianSpec>(&spec.distribution)) {
            for (std::uint64_t i = 0; i < elements; ++i) {
                tensor.values[i] = static_cast<float>(g->mean + g->stddev * sampler.normal());
            }
        } else if (const auto* u = std::get_if<UniformSpec>(&spec.distribution)) {
            for (std::uint64_t i = 0; i < elements; ++i) {
                tensor.values[i] =
                    static_cast<float>(u->lo + (u->hi - u->lo) * sampler.uniform01());
            }
        } else {
            const auto& o = std::get<GaussianOutlierSpec>(spec.distribution);
            for (std::uint64_t i = 0; i < elements; ++i) {
                const bool outlier = sampler.uniform01() < o.outlier_fraction;
                const double sd = outlier ? o.stddev * o.outlier_scale : o.stddev;
                tensor.values[i] = static_cast<float>(o.mean + sd * sampler.normal());
            }
        }
        validate_tensor(tensor);
        tensors.push_back(std::move(tensor));
    }
    return tensors;
}

}  // namespace etcw
