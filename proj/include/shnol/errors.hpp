#pragma once

#include <stdexcept>
#include <string>

namespace shnol {

/// Invalid user input: malformed files, bad generator parameters,
/// inconsistent scenario configs. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical contract was violated at run time: an operator that was
/// declared positive definite is not, an iteration failed to converge,
/// a precondition of an estimate does not hold. Maps to CLI exit code 1.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace shnol
