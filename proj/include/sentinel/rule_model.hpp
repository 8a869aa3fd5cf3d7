#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sentinel/errors.hpp"

namespace sentinel {

enum class RuleGroup { CP, EP, RP, AP, DECL };
enum class ContentCategory { PrivilegeCheck, Functionality, Usage, Logging };
enum class Impact { High, Medium, Low };
enum class RuleScope { Function, Event, Contract };
enum class Review { Pending, Approved };
enum class ConditionKind { If, Unless, When, Always };
enum class EventPolarity { MustEmit, MustNotEmit };

std::string to_string(RuleGroup g);
std::string to_string(ContentCategory c);
std::string to_string(Impact i);
std::string to_string(RuleScope s);
std::string to_string(Review r);
std::string to_string(ConditionKind k);
std::string to_string(EventPolarity p);

/// Condition + action rules ("throw unless authorized").
struct CpPayload {
    std::string condition;
    ConditionKind condition_type = ConditionKind::Always;
    std::string action;
    bool operator==(const CpPayload&) const = default;
};

/// Event emission rules.
struct EpPayload {
    std::string condition;
    std::string event;
    EventPolarity polarity = EventPolarity::MustEmit;
    bool operator==(const EpPayload&) const = default;
};

/// Return-value semantics rules.
struct RpPayload {
    std::string return_semantics;
    bool operator==(const RpPayload&) const = default;
};

/// State-update rules.
struct ApPayload {
    std::string assignment;
    bool operator==(const ApPayload&) const = default;
};

/// Declaration rules, checked statically without the LLM.
struct DeclPayload {
    std::string expected_signature;
    bool operator==(const DeclPayload&) const = default;
};

using GroupPayload = std::variant<CpPayload, EpPayload, RpPayload, ApPayload, DeclPayload>;

struct ErcRule {
    std::string id;
    RuleGroup group = RuleGroup::CP;
    std::optional<std::string> pattern_id;
    ContentCategory content_category = ContentCategory::Usage;
    Impact impact = Impact::Medium;
    RuleScope scope = RuleScope::Function;
    std::string text;  // verbatim sentence from the ERC document
    GroupPayload payload;
    bool compound = false;
    std::optional<std::string> one_shot;
    Review review = Review::Pending;
    bool operator==(const ErcRule&) const = default;
};

struct RuleParam {
    std::string name;
    std::string type;
    bool operator==(const RuleParam&) const = default;
};

struct FunctionSpec {
    std::string name;
    std::vector<RuleParam> params;
    std::optional<std::string> returns;
    bool optional_flag = false;
    std::vector<ErcRule> rules;
    bool operator==(const FunctionSpec&) const = default;
};

struct RuleEventParam {
    std::string name;
    std::string type;
    bool indexed = false;
    bool operator==(const RuleEventParam&) const = default;
};

struct EventSpec {
    std::string name;
    std::vector<RuleEventParam> params;
    std::vector<ErcRule> rules;
    bool operator==(const EventSpec&) const = default;
};

struct ErcRuleSet {
    std::string erc_id;
    std::vector<FunctionSpec> functions;
    std::vector<EventSpec> events;
    std::vector<ErcRule> contract_scope_rules;
    bool operator==(const ErcRuleSet&) const = default;

    /// All rules in file order: per-function, per-event, then contract scope.
    std::vector<const ErcRule*> all_rules() const;
    const ErcRule* find_rule(const std::string& id) const;
    const EventSpec* find_event(const std::string& name) const;
};

struct ValidationIssue {
    std::string rule_id;
    std::string reason;
    bool operator==(const ValidationIssue&) const = default;
};

/// Parses and fully validates a rule file. Throws ParseError / ValidationError.
ErcRuleSet load_ruleset(const std::string& rule_file_text);

/// Serializes a validated rule set; load_ruleset(save_ruleset(s)) == s.
std::string save_ruleset(const ErcRuleSet& set);

/// Returns every invariant breach plus one issue per rule still pending review.
std::vector<ValidationIssue> validate_ruleset(const ErcRuleSet& set);

}  // namespace sentinel
