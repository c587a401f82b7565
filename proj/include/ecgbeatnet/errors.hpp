#pragma once

#include <stdexcept>
#include <string>

namespace ecg {

// Base class for all structured errors raised by the toolkit.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- parsing / decoding ---
struct MalformedHeader : Error {
    using Error::Error;
};
struct UnsupportedFormat : Error {
    using Error::Error;
};
struct TruncatedSignalFile : Error {
    using Error::Error;
};
struct TruncatedAnnotationFile : Error {
    using Error::Error;
};
struct UnknownPseudoCodeLayout : Error {
    using Error::Error;
};

// --- dataset assembly ---
struct MissingLead : Error {
    using Error::Error;
};
struct EmptyClass : Error {
    using Error::Error;
};

// --- numeric core ---
struct ShapeMismatch : Error {
    using Error::Error;
};
struct OddLength : Error {
    using Error::Error;
};
struct StaleCache : Error {
    using Error::Error;
};
struct NonFiniteValue : Error {
    using Error::Error;
};

// --- training / evaluation ---
struct EmptyTrainSet : Error {
    using Error::Error;
};
struct EmptyMatrix : Error {
    using Error::Error;
};

// --- serialized artifacts ---
struct BadMagic : Error {
    using Error::Error;
};
struct VersionMismatch : Error {
    using Error::Error;
};
struct ConfigMismatch : Error {
    using Error::Error;
};
struct CorruptPayload : Error {
    using Error::Error;
};

// --- CLI / environment ---
struct ConfigError : Error {
    using Error::Error;
};
struct FileNotFound : Error {
    using Error::Error;
};
struct NetworkError : Error {
    using Error::Error;
};
struct DigestMismatch : Error {
    using Error::Error;
};

} // namespace ecg
