#ifndef MSD_ERROR_HPP
#define MSD_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msd {

// Factorization or other numeric failure; carries the pivot index when known.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& msg, std::size_t pivot_index)
        : std::runtime_error(msg), pivot(pivot_index) {}
    std::size_t pivot;
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace msd

#endif
