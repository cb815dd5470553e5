#include "peerfx/error.hpp"

namespace peerfx {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::ingestion: return "ingestion";
        case ErrorKind::schema: return "schema";
        case ErrorKind::truncation_violation: return "truncation-violation";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::non_convergence: return "non-convergence";
        case ErrorKind::empty_stratum: return "empty-stratum";
        case ErrorKind::collinearity: return "collinearity";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::degenerate_response: return "degenerate-response";
        case ErrorKind::singular_covariance: return "singular-covariance";
        case ErrorKind::singular_bread: return "singular-bread";
        case ErrorKind::unsupported_form: return "unsupported-form";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::precision: return "precision";
    }
    return "unknown";
}

}  // namespace peerfx
