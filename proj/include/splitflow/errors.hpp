#pragma once

#include <stdexcept>
#include <string>

namespace splitflow {

/// Invalid user-supplied configuration or geometry.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative solver failed to reach its tolerance within its budget.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace splitflow
