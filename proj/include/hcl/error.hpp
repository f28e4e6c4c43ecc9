#pragma once

#include <stdexcept>
#include <string>

namespace hcl {

// Bad configuration or usage. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed manifest, feature file or checkpoint.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A hierarchy level cannot produce triplets (every node there is an only child
// or has a pool smaller than two). Callers are expected to skip the level.
class SchedulingError : public std::runtime_error {
public:
    SchedulingError(int level, const std::string& what)
        : std::runtime_error(what), level_(level) {}
    int level() const noexcept { return level_; }

private:
    int level_;
};

// Degenerate-triplet rejection ran out of attempts for one anchor node.
class RetryExhausted : public std::runtime_error {
public:
    RetryExhausted(std::string node, const std::string& what)
        : std::runtime_error(what), node_(std::move(node)) {}
    const std::string& node() const noexcept { return node_; }

private:
    std::string node_;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hcl
