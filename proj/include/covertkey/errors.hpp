#pragma once

#include <stdexcept>
#include <string>

namespace covertkey {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file or config text.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

// Mismatched alphabet sizes between distributions or sequences.
class AlphabetError : public Error {
public:
    explicit AlphabetError(const std::string& what) : Error(what) {}
};

// Divergence is infinite (absolute-continuity violation) or undefined.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& what) : Error(what) {}
};

// Scalar argument outside its admissible range.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what) {}
};

// Sequence-length or matrix-shape mismatch.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

// A structural precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what) {}
};

// An explicit size guard would be exceeded (enumeration or allocation too large).
class GuardError : public Error {
public:
    explicit GuardError(const std::string& what) : Error(what) {}
};

// Code-size selection produced an empty feasible set.
class InfeasibleSelectionError : public Error {
public:
    explicit InfeasibleSelectionError(const std::string& what) : Error(what) {}
};

// A randomized search exhausted its retry budget.
class SearchError : public Error {
public:
    explicit SearchError(const std::string& what) : Error(what) {}
};

} // namespace covertkey
