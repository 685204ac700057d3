#pragma once

#include <stdexcept>
#include <string>

namespace flowlab {

/// Raised when a configuration file or experiment description is malformed
/// (missing field, wrong type, inconsistent values). The CLI maps this to
/// exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a computation produces non-finite values (NaN/Inf), e.g. an
/// ODE state exploding mid-integration. The message names the failing step.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an optimization run diverges instead of converging.
class training_error : public std::runtime_error {
public:
    explicit training_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace flowlab
