#pragma once

#include <stdexcept>
#include <string>

namespace fedsurf {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated precondition on an operation argument.
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Malformed input file; message names the offending row/column.
class LoadError : public Error {
public:
    explicit LoadError(const std::string& msg) : Error(msg) {}
};

// Infeasible federation/experiment configuration.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Metric evaluation failure (zero censoring weight, no comparable pairs, ...).
class EvalError : public Error {
public:
    explicit EvalError(const std::string& msg) : Error(msg) {}
};

}  // namespace fedsurf
