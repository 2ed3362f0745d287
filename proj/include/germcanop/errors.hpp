#pragma once

#include <stdexcept>
#include <string>

namespace germcanop {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation produced NaN/Inf, or an iteration failed to converge.
struct NumericalFailure : Error {
    using Error::Error;
};

struct InvalidInput : Error {
    using Error::Error;
};

// All samples fell on a degenerate configuration (e.g. the zero locus).
struct InsufficientData : Error {
    using Error::Error;
};

// A rank/determinant condition required by the chart machinery failed.
struct DegenerateChart : Error {
    using Error::Error;
};

// A positivity/dissipativity condition that the theory guarantees was
// violated; signals bad input rather than a recoverable state.
struct PositivityViolation : Error {
    using Error::Error;
};

// Continuous logarithm branch could not be tracked (zero crossing on path).
struct BranchFailure : Error {
    using Error::Error;
};

struct ResolutionError : Error {
    using Error::Error;
};

struct QuantizationError : Error {
    using Error::Error;
};

struct UnsupportedSymbol : Error {
    using Error::Error;
};

}  // namespace germcanop
