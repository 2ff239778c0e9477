#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affectloop {

enum class ErrorCode {
    invalid_argument,
    not_found,
    duplicate,
    integrity,
    consent_refused,
    untrained_scorer,
    scoring_failure,
    contract_violation,
    no_exportable_frames,
    io,
};

std::string_view to_string(ErrorCode code);

/// All library failures surface as this exception; the code is what callers branch on.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace affectloop
