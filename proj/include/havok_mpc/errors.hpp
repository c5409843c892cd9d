#pragma once

#include <stdexcept>
#include <string>

namespace havok {

// Error taxonomy shared with the CLI exit codes: 2 config, 3 data, 4 numeric.
class Error : public std::runtime_error {
public:
    Error(const std::string& msg, int exit_code)
        : std::runtime_error(msg), exit_code_(exit_code) {}

    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

// Invalid arguments or configuration values (bad fractions, non-PD weights, ...).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg, 2) {}
};

// Malformed or unusable data (schema, sampling, non-finite values, sizes, history).
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg, 3) {}
};

// Numerical failures (degenerate spectra, solver non-convergence, divergence).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg, 4) {}
};

}  // namespace havok
