#pragma once

#include <stdexcept>
#include <string>

namespace scatterhom {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class NotPositiveDefiniteError : public Error {
public:
    explicit NotPositiveDefiniteError(const std::string& msg) : Error(msg) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

class InvalidParameterError : public Error {
public:
    explicit InvalidParameterError(const std::string& msg) : Error(msg) {}
};

class DimensionMismatchError : public Error {
public:
    explicit DimensionMismatchError(const std::string& msg) : Error(msg) {}
};

class ConvergenceFailureError : public Error {
public:
    ConvergenceFailureError(const std::string& msg, int iterations, double residual)
        : Error(msg + " (iterations=" + std::to_string(iterations) +
                ", residual=" + std::to_string(residual) + ")"),
          iterations(iterations),
          residual(residual) {}
    int iterations;
    double residual;
};

class DegenerateDataError : public Error {
public:
    explicit DegenerateDataError(const std::string& msg) : Error(msg) {}
};

class SingularCovarianceError : public Error {
public:
    explicit SingularCovarianceError(const std::string& msg) : Error(msg) {}
};

class KurtosisDenominatorError : public Error {
public:
    explicit KurtosisDenominatorError(const std::string& msg) : Error(msg) {}
};

class QuadratureFailureError : public Error {
public:
    explicit QuadratureFailureError(const std::string& msg) : Error(msg) {}
};

class ZeroAlternativeError : public Error {
public:
    explicit ZeroAlternativeError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

}  // namespace scatterhom
