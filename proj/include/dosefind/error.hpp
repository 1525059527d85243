#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dosefind {

enum class ErrorCode : std::uint8_t {
    InvalidInput = 1,  // malformed or out-of-range arguments
    NoData = 2,        // operation needs observations that are not there
    Infeasible = 3,    // generator could not satisfy its constraints
    Io = 4,            // file system failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define DOSEFIND_REQUIRE(cond, code, msg)                       \
    do {                                                        \
        if (!(cond)) throw ::dosefind::Error((code), (msg));    \
    } while (false)

}  // namespace dosefind
