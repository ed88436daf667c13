#pragma once

#include <stdexcept>
#include <string>

namespace lpvcert {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyMatrixError : Error {
    explicit EmptyMatrixError(const std::string& msg = "matrix is empty") : Error(msg) {}
};

struct NotSquareError : Error {
    explicit NotSquareError(const std::string& msg = "matrix is not square") : Error(msg) {}
};

struct ShapeMismatchError : Error {
    explicit ShapeMismatchError(const std::string& msg = "matrix shapes do not compose") : Error(msg) {}
};

struct LengthMismatchError : Error {
    explicit LengthMismatchError(const std::string& msg = "tuple length mismatch") : Error(msg) {}
};

struct UnboundedDomainError : Error {
    explicit UnboundedDomainError(const std::string& msg = "domain must be bounded") : Error(msg) {}
};

struct MissingSGridError : Error {
    explicit MissingSGridError(const std::string& msg =
                                   "output controllability with rank-deficient output matrix requires an s-grid")
        : Error(msg) {}
};

struct NominalPropertyFailsError : Error {
    explicit NominalPropertyFailsError(const std::string& msg = "nominal system does not satisfy the property")
        : Error(msg) {}
};

struct NominalAlreadyViolatedError : Error {
    explicit NominalAlreadyViolatedError(const std::string& msg = "nominal system already violates the property")
        : Error(msg) {}
};

struct NotExpressibleError : Error {
    explicit NotExpressibleError(const std::string& msg =
                                     "perturbation structure cannot realize a rank-dropping direction")
        : Error(msg) {}
};

struct EmptyBoxError : Error {
    explicit EmptyBoxError(const std::string& msg = "box has no coordinates or inverted bounds") : Error(msg) {}
};

struct NegativeDelayError : Error {
    explicit NegativeDelayError(const std::string& msg = "delays must be nonnegative") : Error(msg) {}
};

struct ZeroDelayWithConstraintError : Error {
    explicit ZeroDelayWithConstraintError(const std::string& msg =
                                              "consistency ratios are undefined for a zero delay")
        : Error(msg) {}
};

struct DelayOutOfRangeError : Error {
    explicit DelayOutOfRangeError(const std::string& msg = "delay outside its admissibility interval") : Error(msg) {}
};

struct UnboundedSearchBoxError : Error {
    explicit UnboundedSearchBoxError(const std::string& msg = "search box must be bounded") : Error(msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

}  // namespace lpvcert
