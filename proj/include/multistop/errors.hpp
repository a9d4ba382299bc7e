#ifndef MULTISTOP_ERRORS_HPP
#define MULTISTOP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace multistop {

/// Malformed or out-of-contract input (bad tree, negative reward, bad flag).
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Enumeration or problem size exceeds the configured budget.
class BudgetError : public std::runtime_error {
public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

/// A computed result broke one of its own postconditions.
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace multistop

#endif  // MULTISTOP_ERRORS_HPP
