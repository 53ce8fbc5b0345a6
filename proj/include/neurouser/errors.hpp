#pragma once

#include <stdexcept>
#include <string>

namespace neurouser {

/// Bad input: malformed parameters, files or configuration. CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation has no defined result for the given data. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weighted-average decoding of an all-zero response.
class DegenerateResponse : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Every grid point of a likelihood or posterior is -inf.
class UndecodableResponse : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Pareto fit on equal or too few samples.
class DegenerateFit : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace neurouser
