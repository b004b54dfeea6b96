#pragma once

#include <stdexcept>
#include <string>

namespace recbench {

// Base for everything this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file (message carries line / field context).
class ParseError : public Error {
public:
    using Error::Error;
};

// Caller passed an out-of-contract argument.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Input data exists but cannot support the requested operation
// (empty corpus, disjoint key sets, degenerate split, ...).
class DataError : public Error {
public:
    using Error::Error;
};

class EmptyAfterFilterError : public DataError {
public:
    EmptyAfterFilterError(int k_value, const std::string& msg) : DataError(msg), k(k_value) {}
    int k;
};

// Training left the finite-parameter regime.
class DivergenceError : public Error {
public:
    DivergenceError(int at_epoch, double lr, const std::string& msg)
        : Error(msg), epoch(at_epoch), learning_rate(lr) {}
    int epoch;
    double learning_rate;
};

// A synopsis provider failed for one item.
class ProviderError : public Error {
public:
    ProviderError(std::string item, const std::string& msg) : Error(msg), item_id(std::move(item)) {}
    std::string item_id;
};

// Config file failed schema validation.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace recbench
