#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qdsim {

// Base for every failure raised by the library. The CLI maps each subclass
// onto its exit status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or non-physical argument (non-finite coordinate, bad bounds).
class InputError : public Error {
public:
    using Error::Error;
};

/// Inconsistent settings, e.g. a grid that does not match its layout domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Configuration document rejected by the parser; carries line and key.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, std::string key)
        : Error(format(what, line, key)), line_(line), key_(std::move(key)) {}
    int line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    static std::string format(const std::string& what, int line, const std::string& key) {
        std::string out = "config";
        if (line > 0) out += ":" + std::to_string(line);
        if (!key.empty()) out += " [" + key + "]";
        return out + ": " + what;
    }
    int line_;
    std::string key_;
};

/// Iterative procedure stopped without meeting its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double achieved)
        : Error(what), achieved_(achieved) {}
    double achieved() const { return achieved_; }

private:
    double achieved_;
};

/// Memory or size budget exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Quantity requested outside the range where it is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Curve has its maximum at an endpoint.
class NoFlattopError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Least-squares fit impossible (too few or non-positive samples).
class FitError : public Error {
public:
    using Error::Error;
};

/// No feasible point found by the design search.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Some sweep points failed; the remaining points are still reported.
class PartialSweepError : public Error {
public:
    PartialSweepError(const std::string& what, std::vector<double> failed)
        : Error(what), failed_(std::move(failed)) {}
    const std::vector<double>& failed_points() const { return failed_; }

private:
    std::vector<double> failed_;
};

}  // namespace qdsim
