#include "sindex/types.hpp"

#include <string>

#include "sindex/error.hpp"

namespace sindex {

const char* error_code_name(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::domain: return "domain error";
    case ErrorCode::io: return "I/O error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::version_mismatch: return "version mismatch";
    case ErrorCode::invariant_violation: return "invariant violation";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::convergence: return "convergence failure";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::state: return "state error";
    case ErrorCode::internal: return "internal error";
    }
    return "unknown error";
}

void Batch::validate() const
{
    require(y.size() == x.rows(), ErrorCode::dimension_mismatch,
            "batch has " + std::to_string(y.size()) + " responses but " + std::to_string(x.rows()) + " covariate rows");
    require(y.allFinite() && x.allFinite(), ErrorCode::domain, "batch contains non-finite values");
}

SplitBatch split_batch(const Batch& batch)
{
    const Index n = batch.n();
    const Index h = n / 2;
    return {BatchView(batch.y.head(h), batch.x.topRows(h)), BatchView(batch.y.tail(n - h), batch.x.bottomRows(n - h))};
}

} // namespace sindex
