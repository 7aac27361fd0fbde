#pragma once

#include <stdexcept>
#include <string>

namespace lida {

// Base for every error the library throws. The CLI maps the concrete type to an
// exit code, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

class DegenerateFeature : public Error {
public:
    using Error::Error;
};

class UnknownLabel : public Error {
public:
    using Error::Error;
};

class IncompatibleEncoder : public Error {
public:
    using Error::Error;
};

class NotPretrained : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class Corruption { BadMagic, BadVersion, Truncated, Malformed };

class CorruptFile : public Error {
public:
    CorruptFile(Corruption kind, const std::string& what) : Error(what), kind_(kind) {}
    Corruption kind() const noexcept { return kind_; }

private:
    Corruption kind_;
};

}  // namespace lida
