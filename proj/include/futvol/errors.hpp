#pragma once

#include <stdexcept>
#include <string>

namespace futvol {

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// No usable quotes remain after filtering.
class EmptyPanelError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Iterative or quadrature routine failed to reach its tolerance.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& what, double best_iterate = 0.0)
        : std::runtime_error(what), best_iterate_(best_iterate) {}

    [[nodiscard]] double best_iterate() const noexcept { return best_iterate_; }

private:
    double best_iterate_;
};

/// The first-order implied-volatility expansion produced a non-credible level.
class ExpansionBreakdown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Calibration design matrix is (numerically) rank deficient.
class CollinearityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Monte-Carlo time grid too coarse for the fast factor.
class ResolutionError : public std::invalid_argument {
public:
    ResolutionError(const std::string& what, long required_steps)
        : std::invalid_argument(what), required_steps_(required_steps) {}

    [[nodiscard]] long required_steps() const noexcept { return required_steps_; }

private:
    long required_steps_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DomainError(msg);
}

}  // namespace detail

}  // namespace futvol
