#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sentinel/llm_gateway.hpp"
#include "sentinel/prompt_engine.hpp"
#include "sentinel/rule_model.hpp"
#include "sentinel/solidity_model.hpp"

namespace sentinel {

struct Finding {
    std::string rule_id;
    Impact impact = Impact::Medium;
    ContentCategory category = ContentCategory::Usage;
    std::string contract;
    std::optional<std::string> function;
    std::optional<int> line;
    std::string explanation;
    std::string source;  // "static" for DECL rules, "llm" otherwise
    std::string rule_text;
    std::optional<std::pair<VerdictOutcome, VerdictOutcome>> stage_trace;
};

struct UncertainEntry {
    std::string rule_id;
    std::string function;
    std::string reason;
};

struct AuditReport {
    std::string contract_path;
    std::string contract_sha256;
    std::string ruleset_id;
    std::string model;
    std::vector<Finding> findings;  // canonical order
    int high = 0, medium = 0, low = 0;
    std::vector<UncertainEntry> uncertain;
    int prompts = 0;
    long long in_tokens = 0;
    long long out_tokens = 0;
};

/// Full audit pipeline. The rule set must validate cleanly (ValidationError
/// otherwise); SyntaxError propagates; per-rule BudgetExceeded becomes an
/// uncertain entry instead of aborting.
AuditReport audit_contract(const std::string& source, const std::string& path,
                           const ErcRuleSet& rules, LlmGateway& gateway);

enum class ReportFormat { Text, Json };

std::string render_report(const AuditReport& report, ReportFormat format);

struct ReportDiff {
    std::vector<std::string> added;    // keys present in b only
    std::vector<std::string> removed;  // keys present in a only
};

/// Symmetric difference of finding keys (rule_id, contract, function).
/// Throws RulesetMismatch when the ruleset ids differ.
ReportDiff diff_reports(const AuditReport& a, const AuditReport& b);

}  // namespace sentinel
