#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace crowdmark {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numeric parameter lies outside its documented range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Input data violates the data-model contract. Carries the 1-based row
/// (CSV line or GeoJSON feature index) when one is known.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
        : Error(row ? "row " + std::to_string(*row) + ": " + what : what), row_(row) {}

    [[nodiscard]] std::optional<std::size_t> row() const noexcept { return row_; }

private:
    std::optional<std::size_t> row_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of a mathematical function.
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace crowdmark
