#pragma once

#include <stdexcept>
#include <string>

namespace ucc {

// Base class for all harness errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A fragment kind does not match the mechanism of the target state.
class MechanismMismatch : public Error {
public:
    using Error::Error;
};

// Precondition violation on a public operation (empty text, bad seq, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class ZeroVector : public Error {
public:
    using Error::Error;
};

class EmbedderUnavailable : public Error {
public:
    using Error::Error;
};

// Live-backend transport or response-format failure; the protocol maps this
// to a no-answer classification on the contaminated side.
class BackendFailure : public Error {
public:
    using Error::Error;
};

class MalformedSanitizerOutput : public Error {
public:
    using Error::Error;
};

class MalformedJudgeOutput : public Error {
public:
    using Error::Error;
};

// The clean run of a pair did not match ground truth.
class PrefilterViolation : public Error {
public:
    using Error::Error;
};

class EmptyRun : public Error {
public:
    using Error::Error;
};

// Corpus file violates the published schema; message carries the record location.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Corpus cross-reference to a missing or foreign-dataset convention.
class ReferenceError : public Error {
public:
    using Error::Error;
};

class CacheMiss : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class CredentialMissing : public Error {
public:
    using Error::Error;
};

class MissingRunData : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace ucc
