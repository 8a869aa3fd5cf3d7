#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sentinel/rule_model.hpp"
#include "sentinel/solidity_model.hpp"

namespace sentinel {

enum class PromptStage { Single, ConditionProbe, ActionProbe };
enum class VerdictOutcome { Compliant, Violation, ConditionAbsent, ConditionPresent, Uncertain };

std::string to_string(PromptStage s);
std::string to_string(VerdictOutcome o);

struct Message {
    std::string role;  // "system" or "user"
    std::string text;
};

struct PromptTask {
    std::string rule_id;
    std::vector<Message> messages;
    PromptStage stage = PromptStage::Single;
    int token_estimate = 0;
    std::vector<std::string> warnings;
};

struct Verdict {
    VerdictOutcome outcome = VerdictOutcome::Uncertain;
    std::string explanation;
    std::string raw;
};

/// ceil(characters / 4); monotone in text length.
int estimate_tokens(std::string_view text);

/// Builds the single specialized prompt for a non-compound semantic rule.
/// Throws BudgetExceeded when the estimate exceeds `budget`.
PromptTask specialize_prompt(const ErcRule& rule, const CodeSlice& slice,
                             const std::string& anchor_function, int budget);

struct CompoundPlan {
    PromptTask condition_task;
    /// The action probe, built lazily; issue it only after a
    /// condition-present verdict.
    std::function<PromptTask()> make_action_task;
};

CompoundPlan plan_compound(const ErcRule& rule, const CodeSlice& slice,
                           const std::string& anchor_function, int budget);

/// Extracts the last `VERDICT: <token>` line. Throws UnparseableVerdict.
Verdict parse_verdict(const std::string& response, PromptStage stage);

/// Appended to a retried prompt after an unparseable response.
std::string strict_retry_instruction(PromptStage stage);

/// Bit-exact verdict format instruction appended to every prompt.
std::string verdict_instruction(PromptStage stage);

namespace prompts {
extern const char* kSystemPersona;
const char* group_explanation(RuleGroup group);
std::vector<std::pair<std::string, std::string>> linguistic_patterns(RuleGroup group);
}  // namespace prompts

}  // namespace sentinel
