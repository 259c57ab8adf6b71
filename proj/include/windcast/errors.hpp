#pragma once

#include <stdexcept>
#include <string>

namespace windcast {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV header does not match the documented schema.
struct SchemaError : Error {
    using Error::Error;
};

// A cell could not be parsed; carries 1-based row and the column name.
struct CsvParseError : Error {
    CsvParseError(std::size_t row, std::string column, const std::string& what)
        : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
          row(row),
          column(std::move(column)) {}
    std::size_t row;
    std::string column;
};

// Timestamps not strictly increasing.
struct OrderingError : Error {
    using Error::Error;
};

struct EmptyDatasetError : Error {
    using Error::Error;
};

// Dimension disagreement between operands.
struct ShapeError : Error {
    using Error::Error;
};

struct InsufficientDataError : Error {
    using Error::Error;
};

struct SplitError : Error {
    using Error::Error;
};

// Pearson correlation of a constant series.
struct UndefinedCorrelationError : Error {
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

// A computation produced a non-finite value.
struct NumericError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    using Error::Error;
};

// Training loss became non-finite; carries where it happened.
struct DivergenceError : Error {
    DivergenceError(std::size_t epoch, std::size_t batch, const std::string& cause = "")
        : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                std::to_string(batch) + (cause.empty() ? "" : " (" + cause + ")")),
          epoch(epoch),
          batch(batch) {}
    std::size_t epoch;
    std::size_t batch;
};

// Cache does not belong to the model it is replayed against.
struct StateError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Model file load failures, one type per failure mode.
struct ModelFormatError : Error {
    using Error::Error;
};
struct ModelVersionError : Error {
    using Error::Error;
};
struct ModelTruncationError : Error {
    using Error::Error;
};

}  // namespace windcast
