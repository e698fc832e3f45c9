#pragma once

#include <stdexcept>
#include <string>

namespace rggsb {

// Error taxonomy mapped onto CLI exit codes:
//   UsageError -> 1, DomainError/NumericError -> 2, IoError -> 3.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg, long dyad = -1)
        : std::runtime_error(msg), dyad_index(dyad) {}
    long dyad_index;  // offending dyad where applicable, else -1
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace rggsb
