#pragma once

#include <stdexcept>
#include <string>

namespace qcmap {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
    config = 2,
    numeric = 3,
    io = 4,
    contract = 5,
    dimension = 6,
    checkpoint = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct NumericError : Error {
    explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& w) : Error(ErrorKind::contract, w) {}
};
struct DimensionError : Error {
    explicit DimensionError(const std::string& w) : Error(ErrorKind::dimension, w) {}
};
struct CheckpointError : Error {
    explicit CheckpointError(const std::string& w) : Error(ErrorKind::checkpoint, w) {}
};

} // namespace qcmap
