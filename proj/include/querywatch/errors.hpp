#pragma once

#include <stdexcept>
#include <string>

namespace qw {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define QW_ERROR_TYPE(Name)                                              \
    struct Name : Error {                                                \
        explicit Name(const std::string& what) : Error(what) {}         \
    }

// audio
QW_ERROR_TYPE(MalformedWav);
QW_ERROR_TYPE(UnsupportedEncoding);
QW_ERROR_TYPE(UnsupportedRate);
QW_ERROR_TYPE(SilentInput);
QW_ERROR_TYPE(LengthMismatch);
QW_ERROR_TYPE(ClipTooShort);

// fingerprint / similarity
QW_ERROR_TYPE(DimensionMismatch);
QW_ERROR_TYPE(SchemeMismatch);
QW_ERROR_TYPE(EmptyInput);
QW_ERROR_TYPE(EmptyMemory);
QW_ERROR_TYPE(CorruptFingerprint);

// detector state
QW_ERROR_TYPE(VersionMismatch);
QW_ERROR_TYPE(CorruptSnapshot);

// calibration / simulation / metrics
QW_ERROR_TYPE(CorpusTooSmall);
QW_ERROR_TYPE(CarrierTooShort);
QW_ERROR_TYPE(EmptyPool);
QW_ERROR_TYPE(UncalibratedThreshold);
QW_ERROR_TYPE(ZeroQueries);
QW_ERROR_TYPE(EmptyReference);
QW_ERROR_TYPE(ZeroPerturbation);

// i/o
QW_ERROR_TYPE(IoError);

#undef QW_ERROR_TYPE

// Thrown when a blocked client submits a query before its block expires.
struct ClientBlocked : Error {
    ClientBlocked(const std::string& what, double retry_after)
        : Error(what), retry_after_seconds(retry_after) {}
    double retry_after_seconds = 0.0;
};

// Carries the offending 1-based line number of a bad trace manifest.
struct TraceParseError : Error {
    TraceParseError(const std::string& what, std::size_t line_no)
        : Error(what), line(line_no) {}
    std::size_t line = 0;
};

}  // namespace qw
