#ifndef SEMIDEC_ERRORS_HPP
#define SEMIDEC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace semidec {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A callable produced a non-finite value; the message names the offending point.
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// Relative error against a zero-norm reference.
class DegenerateNorm : public Error {
public:
    using Error::Error;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

/// Iteration ran out of budget; carries whatever trace was accumulated.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, std::vector<std::vector<double>> traces = {})
        : Error(what), traces(std::move(traces)) {}
    std::vector<std::vector<double>> traces;
};

class AssemblyFailure : public Error {
public:
    using Error::Error;
};

class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Least-squares fit with a nullspace of dimension > 1.
class AmbiguousFit : public Error {
public:
    using Error::Error;
};

class PoleInInterval : public Error {
public:
    using Error::Error;
};

class PoleEvaluation : public Error {
public:
    using Error::Error;
};

class SpectrumNotEnclosed : public Error {
public:
    using Error::Error;
};

class PoleEnclosed : public Error {
public:
    using Error::Error;
};

class ShiftSingular : public Error {
public:
    using Error::Error;
};

class StructuralFailure : public Error {
public:
    using Error::Error;
};

class NumericFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace semidec

#endif
