#pragma once

#include <stdexcept>
#include <string>

namespace lbpfc {

/// Raised when E1(phi) + D0 is not positive, i.e. the auxiliary scalar is undefined.
class ModelViolation : public std::runtime_error {
public:
    ModelViolation(const std::string& what, double value)
        : std::runtime_error(what), value_(value) {}
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// An iterative solve hit its iteration cap.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double residual, long iterations, long step = -1)
        : std::runtime_error(what), residual_(residual), iterations_(iterations), step_(step) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }
    /// Time-step index at which the failure occurred, -1 outside a run.
    long step() const noexcept { return step_; }

private:
    double residual_;
    long iterations_;
    long step_;
};

/// Sherman-Morrison denominator vanished.
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration document; key() holds the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position)
        : std::runtime_error(message + " at position " + std::to_string(position)),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

}  // namespace lbpfc
