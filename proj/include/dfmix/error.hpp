#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfmix {

/// Violated precondition of an operation (wrong sizes, mismatched meshes, bad parameters).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite or otherwise out-of-domain numerical input.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Linear sub-solve failed; `pivot` is the offending column when the factorization reports one.
class ConditioningError : public std::runtime_error {
public:
    ConditioningError(const std::string& what, long pivot = -1)
        : std::runtime_error(what), pivot_(pivot) {}
    long pivot() const noexcept { return pivot_; }

private:
    long pivot_;
};

namespace detail {

inline void require(bool cond, const char* msg)
{
    if (!cond)
        throw ContractError(msg);
}

inline void require(bool cond, const std::string& msg)
{
    if (!cond)
        throw ContractError(msg);
}

} // namespace detail
} // namespace dfmix
