#pragma once

#include <stdexcept>
#include <string>

namespace peerfx {

enum class ErrorKind {
    invalid_argument,
    ingestion,
    schema,
    truncation_violation,
    divergence,
    non_convergence,
    empty_stratum,
    collinearity,
    insufficient_data,
    degenerate_response,
    singular_covariance,
    singular_bread,
    unsupported_form,
    numeric,
    precision,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace peerfx
