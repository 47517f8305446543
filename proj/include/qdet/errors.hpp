#pragma once

#include <stdexcept>
#include <string>

namespace qdet {

/// Base class for every error raised by the library. The category decides the
/// CLI exit code: validation problems map to 2, numeric failures to 3.
class Error : public std::runtime_error {
public:
    enum class Category { Validation, Numeric };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(Category::Validation, what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(Category::Validation, what) {}
};

class GridTooSmallError : public Error {
public:
    explicit GridTooSmallError(const std::string& what) : Error(Category::Numeric, what) {}
};

class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& what) : Error(Category::Numeric, what) {}
};

class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& what) : Error(Category::Numeric, what) {}
};

class StiffnessError : public Error {
public:
    explicit StiffnessError(const std::string& what) : Error(Category::Numeric, what) {}
};

class TrackingError : public Error {
public:
    explicit TrackingError(const std::string& what) : Error(Category::Numeric, what) {}
};

class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double last_good)
        : Error(Category::Numeric, what), last_good_(last_good) {}

    /// Last stamp (time or flux) at which all invariants held.
    double last_good() const noexcept { return last_good_; }

private:
    double last_good_;
};

class EstimateUnavailable : public Error {
public:
    explicit EstimateUnavailable(const std::string& what) : Error(Category::Numeric, what) {}
};

/// Error from one point of a parameter sweep; carries the failing step index.
class SweepError : public Error {
public:
    SweepError(Category category, std::size_t step, const std::string& what)
        : Error(category, "sweep step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

} // namespace qdet
