#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace graphon {

/// Error raised when an iterative computation fails to converge or a state
/// becomes non-finite. Carries a diagnostic payload: the last estimate for
/// eigenvalue iterations, the achieved residual for fixed-point solves, or
/// the failing time for integrations.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg,
                           double payload = std::nan(""))
        : std::runtime_error(msg), payload_(payload) {}

    double payload() const noexcept { return payload_; }

private:
    double payload_;
};

}  // namespace graphon
