#pragma once

#include <stdexcept>
#include <string>

namespace tweetsift {

// Exceptions carry the CLI exit code they map to.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

// Malformed input files, bad ids, missing paths, leakage.
class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// A pseudo-labelled example reached a validation fold.
class LeakageError : public DataError {
public:
    using DataError::DataError;
};

// Non-finite losses or gradients, broken internal numeric contracts.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace tweetsift
