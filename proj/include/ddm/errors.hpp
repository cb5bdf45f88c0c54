#pragma once

#include <stdexcept>
#include <string>

namespace ddm {

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised where sigma_t vanishes (t <= 0, or the t = T end of closed_integrals_D1).
struct SingularityError : std::domain_error {
    using std::domain_error::domain_error;
};

struct UnsupportedOperation : std::logic_error {
    using std::logic_error::logic_error;
};

struct DivergedError : std::runtime_error {
    DivergedError(const std::string& what, std::size_t step_)
        : std::runtime_error(what), step(step_) {}
    std::size_t step;
};

}  // namespace ddm
