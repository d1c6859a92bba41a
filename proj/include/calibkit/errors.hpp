#ifndef CALIBKIT_ERRORS_HPP
#define CALIBKIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace calibkit {

/// Base of every error raised by the toolkit. `exit_code()` is what the CLI
/// returns for an uncaught error of that class.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Input outside the admissible domain (parameter bounds, negative q_pot, ...).
class DomainError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// Vector/matrix dimensions that do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// Integrator or other numerical procedure failed to reach its tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }
    int exit_code() const noexcept override { return 5; }

private:
    double residual_;
};

/// Training produced a non-finite loss.
class TrainingDivergence : public Error {
public:
    TrainingDivergence(const std::string& what, int iteration)
        : Error(what), iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }
    int exit_code() const noexcept override { return 6; }

private:
    int iteration_;
};

/// Inconsistent configuration: missing extras, unknown ids, too few samples.
class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Malformed file or document.
class ParseError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Observation data unusable (empty, non-monotone times).
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Spearman correlation undefined for a constant vector.
class UndefinedCorrelation : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace calibkit

#endif
