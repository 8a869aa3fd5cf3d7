#pragma once

#include <stdexcept>
#include <string>

namespace sentinel {

/// Malformed input text (rule file, mock script, Solidity source).
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& reason)
        : std::runtime_error("parse error at line " + std::to_string(line) + ": " + reason),
          line_(line), reason_(reason) {}
    int line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    int line_;
    std::string reason_;
};

/// A rule set invariant does not hold.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string rule_id, const std::string& reason)
        : std::runtime_error("rule " + rule_id + ": " + reason),
          rule_id_(std::move(rule_id)), reason_(reason) {}
    const std::string& rule_id() const { return rule_id_; }
    const std::string& reason() const { return reason_; }

private:
    std::string rule_id_;
    std::string reason_;
};

/// A prompt would exceed the configured input token budget.
class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(int estimate, int budget)
        : std::runtime_error("prompt estimate " + std::to_string(estimate) +
                             " tokens exceeds budget " + std::to_string(budget)),
          estimate_(estimate), budget_(budget) {}
    int estimate() const { return estimate_; }
    int budget() const { return budget_; }

private:
    int estimate_;
    int budget_;
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(int line, const std::string& message)
        : std::runtime_error("syntax error at line " + std::to_string(line) + ": " + message),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// LLM response could not be parsed into the expected structure.
class ExtractionParseError : public std::runtime_error {
public:
    explicit ExtractionParseError(const std::string& what) : std::runtime_error(what) {}
};

/// No VERDICT line found in an LLM response.
class UnparseableVerdict : public std::runtime_error {
public:
    explicit UnparseableVerdict(const std::string& what) : std::runtime_error(what) {}
};

class TransportError : public std::runtime_error {
public:
    explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class AuthError : public std::runtime_error {
public:
    explicit AuthError(const std::string& what) : std::runtime_error(what) {}
};

class RulesetMismatch : public std::runtime_error {
public:
    explicit RulesetMismatch(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sentinel
