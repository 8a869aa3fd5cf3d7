#include "sentinel/rule_model.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace sentinel {

namespace {

int mark_line(const YAML::Node& n) { return n.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& n, const std::string& reason) {
    throw ParseError(n.IsDefined() ? mark_line(n) : 0, reason);
}

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed,
                const std::string& context) {
    for (const auto& kv : map) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key))
            fail(kv.first, "unknown key '" + key + "' in " + context);
    }
}

std::string require_str(const YAML::Node& map, const std::string& key,
                        const std::string& context) {
    const YAML::Node n = map[key];
    if (!n || !n.IsScalar())
        fail(map, "missing or non-scalar key '" + key + "' in " + context);
    return n.as<std::string>();
}

template <typename T>
T parse_enum(const YAML::Node& map, const std::string& key, const std::string& context,
             const std::map<std::string, T>& table) {
    const std::string v = require_str(map, key, context);
    auto it = table.find(v);
    if (it == table.end()) fail(map[key], "bad value '" + v + "' for " + key);
    return it->second;
}

const std::map<std::string, RuleGroup> kGroups = {
    {"CP", RuleGroup::CP}, {"EP", RuleGroup::EP}, {"RP", RuleGroup::RP},
    {"AP", RuleGroup::AP}, {"DECL", RuleGroup::DECL}};
const std::map<std::string, ContentCategory> kCategories = {
    {"privilege-check", ContentCategory::PrivilegeCheck},
    {"functionality", ContentCategory::Functionality},
    {"usage", ContentCategory::Usage},
    {"logging", ContentCategory::Logging}};
const std::map<std::string, Impact> kImpacts = {
    {"high", Impact::High}, {"medium", Impact::Medium}, {"low", Impact::Low}};
const std::map<std::string, RuleScope> kScopes = {
    {"function", RuleScope::Function}, {"event", RuleScope::Event},
    {"contract", RuleScope::Contract}};
const std::map<std::string, Review> kReviews = {
    {"pending", Review::Pending}, {"approved", Review::Approved}};
const std::map<std::string, ConditionKind> kConditionKinds = {
    {"if", ConditionKind::If}, {"unless", ConditionKind::Unless},
    {"when", ConditionKind::When}, {"always", ConditionKind::Always}};
const std::map<std::string, EventPolarity> kPolarities = {
    {"must-emit", EventPolarity::MustEmit}, {"must-not-emit", EventPolarity::MustNotEmit}};

GroupPayload parse_payload(const YAML::Node& n, RuleGroup group, const std::string& rule_id) {
    const std::string ctx = "payload of rule " + rule_id;
    if (!n || !n.IsMap()) fail(n, "missing payload map in rule " + rule_id);
    switch (group) {
        case RuleGroup::CP: {
            check_keys(n, {"condition", "condition_type", "action"}, ctx);
            CpPayload p;
            p.condition = require_str(n, "condition", ctx);
            p.condition_type = parse_enum(n, "condition_type", ctx, kConditionKinds);
            p.action = require_str(n, "action", ctx);
            return p;
        }
        case RuleGroup::EP: {
            check_keys(n, {"condition", "event", "polarity"}, ctx);
            EpPayload p;
            p.condition = require_str(n, "condition", ctx);
            p.event = require_str(n, "event", ctx);
            p.polarity = parse_enum(n, "polarity", ctx, kPolarities);
            return p;
        }
        case RuleGroup::RP: {
            check_keys(n, {"return_semantics"}, ctx);
            return RpPayload{require_str(n, "return_semantics", ctx)};
        }
        case RuleGroup::AP: {
            check_keys(n, {"assignment"}, ctx);
            return ApPayload{require_str(n, "assignment", ctx)};
        }
        case RuleGroup::DECL: {
            check_keys(n, {"expected_signature"}, ctx);
            return DeclPayload{require_str(n, "expected_signature", ctx)};
        }
    }
    fail(n, "unreachable");
}

ErcRule parse_rule(const YAML::Node& n) {
    if (!n.IsMap()) fail(n, "rule entry is not a map");
    const std::string id = require_str(n, "id", "rule");
    const std::string ctx = "rule " + id;
    check_keys(n, {"id", "group", "pattern_id", "content_category", "impact", "scope",
                   "text", "payload", "compound", "one_shot", "review"}, ctx);
    ErcRule r;
    r.id = id;
    r.group = parse_enum(n, "group", ctx, kGroups);
    if (n["pattern_id"]) r.pattern_id = n["pattern_id"].as<std::string>();
    r.content_category = parse_enum(n, "content_category", ctx, kCategories);
    r.impact = parse_enum(n, "impact", ctx, kImpacts);
    r.scope = parse_enum(n, "scope", ctx, kScopes);
    r.text = require_str(n, "text", ctx);
    r.payload = parse_payload(n["payload"], r.group, id);
    const YAML::Node compound = n["compound"];
    if (!compound) fail(n, "missing key 'compound' in " + ctx);
    r.compound = compound.as<bool>();
    if (n["one_shot"]) r.one_shot = n["one_shot"].as<std::string>();
    r.review = parse_enum(n, "review", ctx, kReviews);
    return r;
}

std::vector<ErcRule> parse_rules(const YAML::Node& n, const std::string& context) {
    std::vector<ErcRule> out;
    if (!n) return out;
    if (!n.IsSequence()) fail(n, "'rules' must be a sequence in " + context);
    for (const auto& item : n) out.push_back(parse_rule(item));
    return out;
}

FunctionSpec parse_function(const YAML::Node& n) {
    if (!n.IsMap()) fail(n, "function entry is not a map");
    const std::string name = require_str(n, "name", "function");
    const std::string ctx = "function " + name;
    check_keys(n, {"name", "params", "returns", "optional", "rules"}, ctx);
    FunctionSpec f;
    f.name = name;
    if (n["params"]) {
        for (const auto& p : n["params"]) {
            check_keys(p, {"name", "type"}, "param of " + ctx);
            f.params.push_back({require_str(p, "name", ctx), require_str(p, "type", ctx)});
        }
    }
    if (n["returns"]) f.returns = n["returns"].as<std::string>();
    if (n["optional"]) f.optional_flag = n["optional"].as<bool>();
    f.rules = parse_rules(n["rules"], ctx);
    return f;
}

EventSpec parse_event(const YAML::Node& n) {
    if (!n.IsMap()) fail(n, "event entry is not a map");
    const std::string name = require_str(n, "name", "event");
    const std::string ctx = "event " + name;
    check_keys(n, {"name", "params", "rules"}, ctx);
    EventSpec e;
    e.name = name;
    if (n["params"]) {
        for (const auto& p : n["params"]) {
            check_keys(p, {"name", "type", "indexed"}, "param of " + ctx);
            RuleEventParam ep;
            ep.name = require_str(p, "name", ctx);
            ep.type = require_str(p, "type", ctx);
            if (p["indexed"]) ep.indexed = p["indexed"].as<bool>();
            e.params.push_back(ep);
        }
    }
    e.rules = parse_rules(n["rules"], ctx);
    return e;
}

bool legal_pair(ContentCategory c, Impact i) {
    switch (c) {
        case ContentCategory::PrivilegeCheck: return i == Impact::High;
        case ContentCategory::Functionality: return i == Impact::High || i == Impact::Medium;
        // Recipient-capability checks are usage rules with a high impact.
        case ContentCategory::Usage: return i == Impact::Medium || i == Impact::High;
        case ContentCategory::Logging: return i == Impact::Low;
    }
    return false;
}

bool payload_matches_group(const ErcRule& r) {
    switch (r.group) {
        case RuleGroup::CP: return std::holds_alternative<CpPayload>(r.payload);
        case RuleGroup::EP: return std::holds_alternative<EpPayload>(r.payload);
        case RuleGroup::RP: return std::holds_alternative<RpPayload>(r.payload);
        case RuleGroup::AP: return std::holds_alternative<ApPayload>(r.payload);
        case RuleGroup::DECL: return std::holds_alternative<DeclPayload>(r.payload);
    }
    return false;
}

/// Structural invariants enforced at load time. Review state and payload
/// completeness are left to validate_ruleset so drafts still load.
void check_structure(const ErcRuleSet& set) {
    std::set<std::string> ids;
    auto check_rule = [&](const ErcRule& r, RuleScope expected) {
        if (!ids.insert(r.id).second)
            throw ValidationError(r.id, "duplicate rule id");
        if (r.scope != expected)
            throw ValidationError(r.id, "scope must be " + to_string(expected) +
                                            " for its position in the file");
        if (!payload_matches_group(r))
            throw ValidationError(r.id, "payload does not match group " + to_string(r.group));
        if (!legal_pair(r.content_category, r.impact))
            throw ValidationError(r.id, "illegal impact/category pair " +
                                            to_string(r.content_category) + "/" +
                                            to_string(r.impact));
        if (r.compound && r.group != RuleGroup::CP && r.group != RuleGroup::EP)
            throw ValidationError(r.id, "compound rules must carry a condition and an action probe");
    };
    for (const auto& f : set.functions) {
        std::set<std::string> param_names;
        for (const auto& p : f.params)
            if (!param_names.insert(p.name).second)
                throw ValidationError(f.name, "duplicate param name '" + p.name + "'");
        for (const auto& r : f.rules) check_rule(r, RuleScope::Function);
    }
    for (const auto& e : set.events)
        for (const auto& r : e.rules) check_rule(r, RuleScope::Event);
    for (const auto& r : set.contract_scope_rules) check_rule(r, RuleScope::Contract);
}

void emit_rule(YAML::Emitter& out, const ErcRule& r) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << r.id;
    out << YAML::Key << "group" << YAML::Value << to_string(r.group);
    if (r.pattern_id) out << YAML::Key << "pattern_id" << YAML::Value << *r.pattern_id;
    out << YAML::Key << "content_category" << YAML::Value << to_string(r.content_category);
    out << YAML::Key << "impact" << YAML::Value << to_string(r.impact);
    out << YAML::Key << "scope" << YAML::Value << to_string(r.scope);
    out << YAML::Key << "text" << YAML::Value << r.text;
    out << YAML::Key << "payload" << YAML::Value << YAML::BeginMap;
    std::visit([&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CpPayload>) {
            out << YAML::Key << "condition" << YAML::Value << p.condition;
            out << YAML::Key << "condition_type" << YAML::Value << to_string(p.condition_type);
            out << YAML::Key << "action" << YAML::Value << p.action;
        } else if constexpr (std::is_same_v<T, EpPayload>) {
            out << YAML::Key << "condition" << YAML::Value << p.condition;
            out << YAML::Key << "event" << YAML::Value << p.event;
            out << YAML::Key << "polarity" << YAML::Value << to_string(p.polarity);
        } else if constexpr (std::is_same_v<T, RpPayload>) {
            out << YAML::Key << "return_semantics" << YAML::Value << p.return_semantics;
        } else if constexpr (std::is_same_v<T, ApPayload>) {
            out << YAML::Key << "assignment" << YAML::Value << p.assignment;
        } else {
            out << YAML::Key << "expected_signature" << YAML::Value << p.expected_signature;
        }
    }, r.payload);
    out << YAML::EndMap;
    out << YAML::Key << "compound" << YAML::Value << r.compound;
    if (r.one_shot) {
        // Block literals only round-trip exactly for text ending in a single
        // newline with no trailing whitespace on any line.
        const std::string& s = *r.one_shot;
        bool literal_safe = s.size() > 1 && s.back() == '\n' && s[s.size() - 2] != '\n' &&
                            s.find('\n') != s.size() - 1;
        if (literal_safe)
            for (size_t i = 0; i + 1 < s.size(); ++i)
                if (s[i + 1] == '\n' && (s[i] == ' ' || s[i] == '\t')) literal_safe = false;
        out << YAML::Key << "one_shot" << YAML::Value;
        if (literal_safe) out << YAML::Literal;
        out << s;
    }
    out << YAML::Key << "review" << YAML::Value << to_string(r.review);
    out << YAML::EndMap;
}

void emit_rules(YAML::Emitter& out, const std::vector<ErcRule>& rules) {
    out << YAML::BeginSeq;
    for (const auto& r : rules) emit_rule(out, r);
    out << YAML::EndSeq;
}

}  // namespace

std::string to_string(RuleGroup g) {
    switch (g) {
        case RuleGroup::CP: return "CP";
        case RuleGroup::EP: return "EP";
        case RuleGroup::RP: return "RP";
        case RuleGroup::AP: return "AP";
        case RuleGroup::DECL: return "DECL";
    }
    return "?";
}

std::string to_string(ContentCategory c) {
    switch (c) {
        case ContentCategory::PrivilegeCheck: return "privilege-check";
        case ContentCategory::Functionality: return "functionality";
        case ContentCategory::Usage: return "usage";
        case ContentCategory::Logging: return "logging";
    }
    return "?";
}

std::string to_string(Impact i) {
    switch (i) {
        case Impact::High: return "high";
        case Impact::Medium: return "medium";
        case Impact::Low: return "low";
    }
    return "?";
}

std::string to_string(RuleScope s) {
    switch (s) {
        case RuleScope::Function: return "function";
        case RuleScope::Event: return "event";
        case RuleScope::Contract: return "contract";
    }
    return "?";
}

std::string to_string(Review r) {
    return r == Review::Approved ? "approved" : "pending";
}

std::string to_string(ConditionKind k) {
    switch (k) {
        case ConditionKind::If: return "if";
        case ConditionKind::Unless: return "unless";
        case ConditionKind::When: return "when";
        case ConditionKind::Always: return "always";
    }
    return "?";
}

std::string to_string(EventPolarity p) {
    return p == EventPolarity::MustEmit ? "must-emit" : "must-not-emit";
}

std::vector<const ErcRule*> ErcRuleSet::all_rules() const {
    std::vector<const ErcRule*> out;
    for (const auto& f : functions)
        for (const auto& r : f.rules) out.push_back(&r);
    for (const auto& e : events)
        for (const auto& r : e.rules) out.push_back(&r);
    for (const auto& r : contract_scope_rules) out.push_back(&r);
    return out;
}

const ErcRule* ErcRuleSet::find_rule(const std::string& id) const {
    for (const auto* r : all_rules())
        if (r->id == id) return r;
    return nullptr;
}

const EventSpec* ErcRuleSet::find_event(const std::string& name) const {
    for (const auto& e : events)
        if (e.name == name) return &e;
    return nullptr;
}

ErcRuleSet load_ruleset(const std::string& rule_file_text) {
    YAML::Node root;
    try {
        root = YAML::Load(rule_file_text);
    } catch (const YAML::ParserException& ex) {
        throw ParseError(ex.mark.line + 1, ex.msg);
    }
    if (!root.IsMap()) throw ParseError(1, "rule file must be a YAML map");
    check_keys(root, {"erc", "functions", "events", "contract_scope_rules"}, "rule file");

    ErcRuleSet set;
    set.erc_id = require_str(root, "erc", "rule file");
    if (root["functions"])
        for (const auto& f : root["functions"]) set.functions.push_back(parse_function(f));
    if (root["events"])
        for (const auto& e : root["events"]) set.events.push_back(parse_event(e));
    if (root["contract_scope_rules"]) {
        for (const auto& r : root["contract_scope_rules"])
            set.contract_scope_rules.push_back(parse_rule(r));
    }
    check_structure(set);
    return set;
}

std::string save_ruleset(const ErcRuleSet& set) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "erc" << YAML::Value << set.erc_id;
    out << YAML::Key << "functions" << YAML::Value << YAML::BeginSeq;
    for (const auto& f : set.functions) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << f.name;
        out << YAML::Key << "params" << YAML::Value << YAML::BeginSeq;
        for (const auto& p : f.params) {
            out << YAML::Flow << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << p.name;
            out << YAML::Key << "type" << YAML::Value << p.type;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
        if (f.returns) out << YAML::Key << "returns" << YAML::Value << *f.returns;
        if (f.optional_flag) out << YAML::Key << "optional" << YAML::Value << true;
        out << YAML::Key << "rules" << YAML::Value;
        emit_rules(out, f.rules);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "events" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : set.events) {
        out << YAML::BeginMap;
        out << YAML::Key << "name" << YAML::Value << e.name;
        out << YAML::Key << "params" << YAML::Value << YAML::BeginSeq;
        for (const auto& p : e.params) {
            out << YAML::Flow << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << p.name;
            out << YAML::Key << "type" << YAML::Value << p.type;
            out << YAML::Key << "indexed" << YAML::Value << p.indexed;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
        out << YAML::Key << "rules" << YAML::Value;
        emit_rules(out, e.rules);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "contract_scope_rules" << YAML::Value;
    emit_rules(out, set.contract_scope_rules);
    out << YAML::EndMap;
    std::string text = out.c_str();
    text.push_back('\n');
    return text;
}

std::vector<ValidationIssue> validate_ruleset(const ErcRuleSet& set) {
    std::vector<ValidationIssue> issues;
    try {
        check_structure(set);
    } catch (const ValidationError& ex) {
        issues.push_back({ex.rule_id(), ex.reason()});
    }
    for (const auto* r : set.all_rules()) {
        if (r->review == Review::Pending)
            issues.push_back({r->id, "pending human review"});
        if (const auto* cp = std::get_if<CpPayload>(&r->payload)) {
            if (cp->condition.empty() || cp->action.empty())
                issues.push_back({r->id, "CP payload incomplete"});
        }
        if (const auto* decl = std::get_if<DeclPayload>(&r->payload)) {
            if (decl->expected_signature.empty())
                issues.push_back({r->id, "DECL payload incomplete"});
        }
        if (const auto* ep = std::get_if<EpPayload>(&r->payload)) {
            if (!set.find_event(ep->event))
                issues.push_back({r->id, "event '" + ep->event +
                                             "' does not resolve to an event spec"});
        }
    }
    return issues;
}

}  // namespace sentinel
