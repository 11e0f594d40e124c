#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tcg {

/// Base of every error raised by the engine. Callers that only need to
/// distinguish "bad data" from programming errors can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line, std::string reason)
        : Error("line " + std::to_string(line) + ": " + reason),
          line_(line), reason_(std::move(reason)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

#define TCG_DECLARE_ERROR(Name)              \
    class Name : public Error {              \
    public:                                  \
        using Error::Error;                  \
    }

TCG_DECLARE_ERROR(DuplicateKey);
TCG_DECLARE_ERROR(InvalidProfile);
TCG_DECLARE_ERROR(InvalidParams);
TCG_DECLARE_ERROR(WindowMismatch);
TCG_DECLARE_ERROR(OutOfOrderEvent);
TCG_DECLARE_ERROR(InvalidSmoothing);
TCG_DECLARE_ERROR(InvalidVocab);
TCG_DECLARE_ERROR(UnknownNode);
TCG_DECLARE_ERROR(InsufficientData);
TCG_DECLARE_ERROR(DimensionMismatch);
TCG_DECLARE_ERROR(DegenerateLabels);
TCG_DECLARE_ERROR(UnfittedModel);
TCG_DECLARE_ERROR(MalformedSignature);
TCG_DECLARE_ERROR(CoverageGap);
TCG_DECLARE_ERROR(IncompatibleModel);
TCG_DECLARE_ERROR(UnreadableInput);
TCG_DECLARE_ERROR(MalformedDocument);

#undef TCG_DECLARE_ERROR

}  // namespace tcg
