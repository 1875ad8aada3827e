#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kfree {

using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;
using i128 = __int128;

// Errors carry the CLI exit status they map to:
// 1 usage, 2 I/O, 3 computation envelope violation.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const { return 3; }
};

// Bad arguments or a violated precondition.
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 1; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const override { return 2; }
};

// Checkpoint bytes that fail validation (magic, version, length, crc).
class CorruptCheckpoint : public IoError {
public:
    using IoError::IoError;
};

// Results would leave the range in which the numerics are known to be valid
// (tracker overflow, table too small, precision or term budget exhausted).
class EnvelopeError : public Error {
public:
    using Error::Error;
};

class ResourceError : public EnvelopeError {
public:
    using EnvelopeError::EnvelopeError;
};

std::string to_string(u128 v);
std::string to_string(i128 v);

}  // namespace kfree
