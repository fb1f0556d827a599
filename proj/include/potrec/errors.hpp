#pragma once

#include <stdexcept>
#include <string>

namespace potrec {

// Bad argument outside an operation's documented domain.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input that is valid in principle but too coarse / inconsistent for the request.
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Base for failures of the numerics themselves (exit code 3 in the CLI).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotContractive : NumericalError {
    double observed_ratio;
    explicit NotContractive(double r, const std::string& where = "")
        : NumericalError("fixed-point iteration is not contractive (ratio " + std::to_string(r) + ")" + where),
          observed_ratio(r) {}
};

struct NearSingular : NumericalError {
    double condition_estimate;
    explicit NearSingular(double c, const std::string& where = "")
        : NumericalError("discrete Dirichlet problem is near-singular (condition ~ " + std::to_string(c) + ")" + where),
          condition_estimate(c) {}
};

struct IllConditioned : NumericalError {
    double cond;
    explicit IllConditioned(double c, const std::string& where = "")
        : NumericalError("boundary system is ill-conditioned (cond " + std::to_string(c) + ")" + where), cond(c) {}
};

struct NoConvergence : NumericalError {
    double residual;
    explicit NoConvergence(double r, const std::string& where = "")
        : NumericalError("iterative solve did not converge (residual " + std::to_string(r) + ")" + where),
          residual(r) {}
};

}  // namespace potrec
