#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hsse {

// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or size disagreement between operands.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

// NaN or infinity where a finite value is required.
class NonFiniteError : public Error {
public:
    explicit NonFiniteError(const std::string& what) : Error(what) {}
};

// A field of a structured value violates its invariant; `field` names it.
class ValidationError : public Error {
public:
    ValidationError(std::string field_name, const std::string& what)
        : Error(what), field(std::move(field_name)) {}
    std::string field;
};

// Two competing router logits are within the boundary tolerance, so the
// top-K active set is not locally constant and the gate gradient is not
// defined. Callers in training may retry with a perturbed input.
class SelectionBoundaryError : public Error {
public:
    SelectionBoundaryError(double gap_value, const std::string& what)
        : Error(what), gap(gap_value) {}
    double gap;
};

// Adding an edge would close a cycle; `path` lists the ids along the
// offending loop, first id repeated at the end.
class CycleError : public Error {
public:
    CycleError(std::vector<std::string> cycle_path, const std::string& what)
        : Error(what), path(std::move(cycle_path)) {}
    std::vector<std::string> path;
};

// Config file or CLI flag failed schema validation.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// Training loss became non-finite; `epoch` is where it happened.
class DivergenceError : public Error {
public:
    DivergenceError(int at_epoch, const std::string& what)
        : Error(what), epoch(at_epoch) {}
    int epoch;
};

}  // namespace hsse
