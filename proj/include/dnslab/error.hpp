#pragma once

#include <stdexcept>
#include <string>

namespace dnslab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// packet layer
struct MtuTooSmall : Error { using Error::Error; };
struct DfSet : Error { using Error::Error; };
struct Unadjustable : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

// provider layer
struct DetailsMismatch : Error { using Error::Error; };
struct CaptchaBlocked : Error { using Error::Error; };
struct TooManyRequests : Error { using Error::Error; };
struct InvalidToken : Error { using Error::Error; };

// cli layer
struct ConsentMissing : Error { using Error::Error; };

struct SchemaError : Error {
    SchemaError(std::string field_, const std::string& what_)
        : Error("scenario schema: " + field_ + ": " + what_), field(std::move(field_)) {}
    std::string field;
};

} // namespace dnslab
