#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace omega_grid {

enum class ErrorKind {
    Dimension,
    Domain,
    Singular,
    Infeasible,
    Assumption,
    Topology,
    Reduction,
    Construction,
    Rejection,
    Step,
    Config,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can emit
/// machine-readable error documents without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Scenario/config failure located by a JSON pointer into the document.
class ConfigError : public Error {
public:
    ConfigError(std::string pointer, const std::string& message)
        : Error(ErrorKind::Config, message), pointer_(std::move(pointer)) {}

    [[nodiscard]] const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

}  // namespace omega_grid
