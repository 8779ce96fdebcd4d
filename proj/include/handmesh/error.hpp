#pragma once

#include <stdexcept>
#include <string>

namespace handmesh {

// Shape/dimension mismatches between operands.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated call contracts (non-scalar loss, bad argument ranges, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf detected by checked mode, degenerate inputs, failed alignments.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Config files, checkpoints, dataset manifests.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace handmesh
