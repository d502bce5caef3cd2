#pragma once

#include <stdexcept>
#include <string>

namespace etcw {

// Error categories map 1:1 onto the CLI exit codes: validation = 1,
// corruption = 2, internal = 3 (0 is success).
enum class ErrorKind : int {
    Validation = 1,
    Corruption = 2,
    Internal = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Bad inputs: malformed manifests, incompatible flag combinations,
// out-of-range parameters, non-finite weights.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message)
        : Error(ErrorKind::Validation, message) {}
};

// Damaged data: checksum mismatches, truncated archives, undecodable
// bitstreams.
class CorruptionError : public Error {
public:
    explicit CorruptionError(const std::string& message)
        : Error(ErrorKind::Corruption, message) {}
};

class InternalError : public Error {
public:
    explicit InternalError(const std::string& message)
        : Error(ErrorKind::Internal, message) {}
};

}  // namespace etcw
