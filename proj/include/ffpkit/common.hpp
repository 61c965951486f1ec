#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ffpkit {

enum class ErrorCode {
    invalid_argument,
    numeric_error,
    config_error,
    io_error,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::numeric_error: return "numeric-error";
        case ErrorCode::config_error: return "config-error";
        case ErrorCode::io_error: return "io-error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void check(bool ok, ErrorCode code, const std::string& message) {
    if (!ok) {
        fail(code, message);
    }
}

inline void check_arg(bool ok, const std::string& message) {
    check(ok, ErrorCode::invalid_argument, message);
}

// Incremental FNV-1a over raw bytes; used to fingerprint parameter sets.
struct Fnv1a {
    uint64_t state = 0xcbf29ce484222325ULL;

    void update(const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            state ^= uint64_t(p[i]);
            state *= 0x100000001b3ULL;
        }
    }

    uint64_t digest() const { return state; }
};

}  // namespace ffpkit
