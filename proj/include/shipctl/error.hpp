#pragma once

#include <stdexcept>
#include <string>

namespace shipctl {

enum class ErrorKind {
    InvalidState,
    InvalidParameter,
    SingularMassMatrix,
    NoEquilibrium,
    AtAsymptote,
    DegeneratePitchfork,
    NotOscillatory,
    DegenerateCriticality,
    StepUnderflow,
    Config,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace shipctl
