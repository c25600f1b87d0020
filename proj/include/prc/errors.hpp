#pragma once

#include <stdexcept>
#include <string>

namespace prc {

// Invalid arguments or violated preconditions detected before any numerics run.
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Factorizations or iterations that failed on admissible input.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prc
