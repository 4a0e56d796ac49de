#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace routecal {

// Malformed or invariant-violating input. `line` is 1-based when the error
// comes from a file reader, 0 otherwise.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// A computation could not produce a defined result (degenerate tertiles,
// singular systems, non-finite losses, ...).
class ComputeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace routecal
