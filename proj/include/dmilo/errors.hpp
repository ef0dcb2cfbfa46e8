#pragma once

#include <stdexcept>
#include <string>

namespace ilo {

// Invalid construction parameters or config file contents.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Vector dimensions do not match.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solve produced a non-finite loss.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, int iteration, int layer = -1, int outer = -1)
        : std::runtime_error(what), iteration(iteration), layer(layer), outer(outer) {}
    int iteration;
    int layer;  // -1 when not attributable to a layer
    int outer;  // -1 when not inside an outer loop
};

// Input set collapses to a point or is otherwise unusable.
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ilo
