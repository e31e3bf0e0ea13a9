#pragma once

#include <stdexcept>
#include <string>

namespace fdms {

// ValidationError: input data violates a documented invariant (bad sample
// rate, non-monotonic timestamps, out-of-range values). Message names the
// offending field and, where known, the record index or line number.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// FormatError: a file or byte stream is structurally malformed (bad magic,
// truncated payload, checksum mismatch). Message carries a byte offset or
// line number when one is available.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// ConfigError: command-line or config-file values that are syntactically
// valid but unusable (unknown key, value out of range, missing file).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fdms
