#ifndef FORMCTL_ERRORS_HPP
#define FORMCTL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace formctl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// Rotation angle within tolerance of pi; the principal log branch is ill defined.
struct BranchSingularity : Error {
    using Error::Error;
};

struct NonOrthogonal : Error {
    using Error::Error;
};

struct RankDeficient : Error {
    using Error::Error;
};

struct NotCritical : Error {
    using Error::Error;
};

struct NonReciprocal : Error {
    using Error::Error;
};

// Offset field carries an entry outside its declared edge support.
struct SupportViolation : Error {
    using Error::Error;
};

struct NoConvergence : Error {
    using Error::Error;
};

struct DivergedState : Error {
    using Error::Error;
};

struct SingularLinearization : Error {
    using Error::Error;
};

struct SingularJacobian : Error {
    using Error::Error;
};

}  // namespace formctl

#endif  // FORMCTL_ERRORS_HPP
