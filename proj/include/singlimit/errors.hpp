#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace singlimit {

/// Invalid parameters, inputs outside an operation's domain, malformed configuration.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure during time stepping.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), message_(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    std::size_t step_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace singlimit
