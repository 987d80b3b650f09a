#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evdr {

// Every failure surfaced by the library derives from Error. kind() is a short
// stable tag the CLI prints so diagnostics can be grepped.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual std::string_view kind() const noexcept = 0;
};

#define EVDR_DEFINE_ERROR(Name, Tag)                                          \
    class Name : public Error {                                               \
    public:                                                                   \
        using Error::Error;                                                   \
        std::string_view kind() const noexcept override { return Tag; }       \
    }

EVDR_DEFINE_ERROR(ConfigError, "config");
EVDR_DEFINE_ERROR(RangeError, "range");
EVDR_DEFINE_ERROR(EligibilityError, "eligibility");
EVDR_DEFINE_ERROR(DataError, "data");
EVDR_DEFINE_ERROR(ShapeError, "shape-mismatch");
EVDR_DEFINE_ERROR(NumericError, "numeric");
EVDR_DEFINE_ERROR(ArgumentError, "argument");
EVDR_DEFINE_ERROR(CapacityError, "capacity");
EVDR_DEFINE_ERROR(UndefinedCorrelation, "undefined-correlation");
EVDR_DEFINE_ERROR(ParseError, "parse");
EVDR_DEFINE_ERROR(ValidationError, "validation");
EVDR_DEFINE_ERROR(IoError, "io");
EVDR_DEFINE_ERROR(NotFoundError, "not-found");

#undef EVDR_DEFINE_ERROR

} // namespace evdr
