#pragma once

#include <stdexcept>
#include <string>

namespace pansharp {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCode : int {
    generic = 1,
    config = 2,
    shape = 3,
    divergence = 4,
    io = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(ErrorCode::config, msg) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(ErrorCode::shape, msg) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error(ErrorCode::divergence, msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(ErrorCode::io, msg) {}
};

// Raster decode failures, kept distinct so callers can tell them apart.
class BadMagicError : public IoError {
public:
    explicit BadMagicError(const std::string& msg) : IoError(msg) {}
};

class TruncatedFileError : public IoError {
public:
    explicit TruncatedFileError(const std::string& msg) : IoError(msg) {}
};

class DimOverflowError : public IoError {
public:
    explicit DimOverflowError(const std::string& msg) : IoError(msg) {}
};

// A metric whose defining formula degenerates on the given input (all-zero
// norms, zero band mean, zero variance, image smaller than one block).
class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& msg) : Error(ErrorCode::generic, msg) {}
};

} // namespace pansharp
