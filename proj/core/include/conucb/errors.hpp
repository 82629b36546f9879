#pragma once

#include <stdexcept>
#include <string>

namespace conucb {

// Invalid parameters, dimension mismatches, broken invariants in inputs.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Calling an operation outside its precondition (empty slate, no candidates).
class UsageError : public std::logic_error {
public:
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Factorization failures and indefinite quadratic forms.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input files. The message carries the path and line number.
class LoadError : public std::runtime_error {
public:
    explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace conucb
