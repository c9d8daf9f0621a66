#pragma once

#include <stdexcept>
#include <string>

namespace piff {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GridError : public Error {
public:
    using Error::Error;
};

class RainfallError : public Error {
public:
    using Error::Error;
};

class SpmError : public Error {
public:
    using Error::Error;
};

class OdeError : public Error {
public:
    OdeError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class ModelError : public Error {
public:
    using Error::Error;
};

class CfmError : public Error {
public:
    using Error::Error;
};

class MetricsError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

} // namespace piff
