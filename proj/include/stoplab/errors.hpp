#pragma once

#include <stdexcept>
#include <string>

namespace stoplab {

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct PrecisionError : std::runtime_error {
    explicit PrecisionError(const std::string& what) : std::runtime_error(what) {}
};

struct CapacityError : std::runtime_error {
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

struct NormalizationError : std::runtime_error {
    explicit NormalizationError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericalInconsistencyError : std::runtime_error {
    explicit NumericalInconsistencyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace stoplab
