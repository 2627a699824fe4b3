#pragma once

#include <stdexcept>
#include <string>

namespace bgest {

// Every failure surfaced by the library derives from Error so callers can
// catch one type; the subclasses name the stage that failed.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IngestError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class WriteError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class EstimationError : public Error {
public:
    using Error::Error;
};

class SnapshotError : public Error {
public:
    using Error::Error;
};

// Caller broke a documented precondition (dimension mismatch, wrong geometry).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace bgest
