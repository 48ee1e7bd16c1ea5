#pragma once

#include <stdexcept>
#include <string>

namespace aircast {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes, so new failure modes should derive from the closest match.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define AIRCAST_DEFINE_ERROR(Name, Base)              \
    class Name : public Base {                        \
    public:                                           \
        using Base::Base;                             \
    }

// Input validation.
AIRCAST_DEFINE_ERROR(PreconditionError, Error);
AIRCAST_DEFINE_ERROR(GranularityError, PreconditionError);
AIRCAST_DEFINE_ERROR(LengthError, PreconditionError);
AIRCAST_DEFINE_ERROR(LengthMismatch, PreconditionError);
AIRCAST_DEFINE_ERROR(SeedError, PreconditionError);
AIRCAST_DEFINE_ERROR(SplitError, PreconditionError);
AIRCAST_DEFINE_ERROR(RangeError, PreconditionError);
AIRCAST_DEFINE_ERROR(DimensionError, PreconditionError);
AIRCAST_DEFINE_ERROR(TooShort, PreconditionError);
AIRCAST_DEFINE_ERROR(NonStationaryError, PreconditionError);

// Empty data after filtering.
AIRCAST_DEFINE_ERROR(EmptySeries, Error);
AIRCAST_DEFINE_ERROR(EmptyInput, EmptySeries);

// I/O and file schemas.
AIRCAST_DEFINE_ERROR(IoError, Error);
AIRCAST_DEFINE_ERROR(SchemaError, Error);

// Numerical failures.
AIRCAST_DEFINE_ERROR(NumericalError, Error);
AIRCAST_DEFINE_ERROR(OptimizerFailure, NumericalError);
AIRCAST_DEFINE_ERROR(NoConvergedModel, NumericalError);
AIRCAST_DEFINE_ERROR(DivergenceError, NumericalError);
AIRCAST_DEFINE_ERROR(FactorizationError, NumericalError);
AIRCAST_DEFINE_ERROR(NoValidFit, NumericalError);

#undef AIRCAST_DEFINE_ERROR

} // namespace aircast
