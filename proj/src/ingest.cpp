#include "sentinel/ingest.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <sstream>

#include "sentinel/errors.hpp"
#include "sentinel/prompt_engine.hpp"

namespace sentinel {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string join_range(const std::vector<std::string>& lines, int first, int last) {
    std::string out;
    for (int i = first; i <= last; ++i) {
        out += lines[i - 1];
        out += '\n';
    }
    return out;
}

std::string render_decl(const FunctionSpec& fn) {
    std::ostringstream s;
    s << "function " << fn.name << "(";
    for (size_t i = 0; i < fn.params.size(); ++i) {
        if (i) s << ", ";
        s << fn.params[i].type << " " << fn.params[i].name;
    }
    s << ")";
    if (fn.returns) s << " returns (" << *fn.returns << ")";
    return s.str();
}

std::string render_event_decl(const EventSpec& ev) {
    std::ostringstream s;
    s << "event " << ev.name << "(";
    for (size_t i = 0; i < ev.params.size(); ++i) {
        if (i) s << ", ";
        s << ev.params[i].type;
        if (ev.params[i].indexed) s << " indexed";
        s << " " << ev.params[i].name;
    }
    s << ")";
    return s.str();
}

std::string decl_signature(const FunctionSpec& fn) {
    std::ostringstream s;
    s << fn.name << "(";
    for (size_t i = 0; i < fn.params.size(); ++i) {
        if (i) s << ",";
        s << fn.params[i].type;
    }
    s << ")";
    if (fn.returns) s << " -> " << *fn.returns;
    return s.str();
}

std::string decl_event_signature(const EventSpec& ev) {
    std::ostringstream s;
    s << ev.name << "(";
    for (size_t i = 0; i < ev.params.size(); ++i) {
        if (i) s << ",";
        s << ev.params[i].type;
        if (ev.params[i].indexed) s << " indexed";
    }
    s << ")";
    return s.str();
}

// Greedily packs consecutive sections into segments of at most max_chars.
// Throws BudgetExceeded when one section alone cannot fit.
std::vector<std::string> segment_bodies(const ErcDocument& doc, int max_chars,
                                        const std::vector<std::string>& lines) {
    std::vector<std::string> segments;
    std::string cur;
    for (const auto& sec : doc.sections) {
        std::string text = join_range(lines, sec.first_line, sec.last_line);
        if (static_cast<int>(text.size()) > max_chars)
            throw BudgetExceeded(estimate_tokens(text), max_chars / 4);
        if (!cur.empty() && static_cast<int>(cur.size() + text.size()) > max_chars) {
            segments.push_back(cur);
            cur.clear();
        }
        cur += text;
    }
    if (!cur.empty()) segments.push_back(cur);
    return segments;
}

// Returns the document bodies to prompt over: the whole body when it fits the
// gateway budget after the fixed prompt overhead, otherwise section segments.
std::vector<std::string> doc_bodies(const ErcDocument& doc, LlmGateway& llm,
                                    int overhead_tokens) {
    int budget = llm.config().input_budget;
    int allowance = budget - overhead_tokens - 64;
    if (allowance <= 0) throw BudgetExceeded(overhead_tokens + 64, budget);
    if (estimate_tokens(doc.body) <= allowance) return {doc.body};
    auto lines = split_lines(doc.body);
    return segment_bodies(doc, allowance * 4, lines);
}

void log_push(std::vector<ExtractLogEntry>* log, const std::string& target,
              const std::string& group, int tokens, const std::string& outcome) {
    if (log) log->push_back({target, group, tokens, outcome});
}

// Sends the prompt and parses its response via `parse`; one retry with a
// stricter format instruction, then ExtractionParseError.
template <typename Parse>
auto ask(LlmGateway& llm, const std::string& user_text, Parse parse,
         std::vector<ExtractLogEntry>* log, const std::string& target,
         const std::string& group) {
    std::vector<Message> messages{{"system", prompts::kSystemPersona}, {"user", user_text}};
    int tokens = 0;
    for (const auto& m : messages) tokens += estimate_tokens(m.text);
    std::string response;
    try {
        response = llm.complete(messages);
    } catch (...) {
        log_push(log, target, group, tokens, "error: request failed");
        throw;
    }
    try {
        auto parsed = parse(response);
        log_push(log, target, group, tokens, "ok");
        return parsed;
    } catch (const ExtractionParseError&) {
    }
    messages.back().text +=
        "\n\nYour previous answer was not in the required format. Respond again with "
        "only the YAML sequence described above, starting with \"- \" on the first "
        "line, and no surrounding prose.";
    tokens = 0;
    for (const auto& m : messages) tokens += estimate_tokens(m.text);
    response = llm.complete(messages);
    try {
        auto parsed = parse(response);
        log_push(log, target, group, tokens, "retry-ok");
        return parsed;
    } catch (const ExtractionParseError& ex) {
        log_push(log, target, group, tokens, std::string("error: ") + ex.what());
        throw;
    }
}

YAML::Node parse_sequence(const std::string& response) {
    YAML::Node node;
    try {
        node = YAML::Load(response);
    } catch (const YAML::ParserException& ex) {
        throw ExtractionParseError(std::string("response is not valid YAML: ") + ex.msg);
    }
    if (node.IsNull()) return YAML::Node(YAML::NodeType::Sequence);
    if (!node.IsSequence()) throw ExtractionParseError("response is not a YAML sequence");
    return node;
}

std::vector<FunctionSpec> parse_function_list(const std::string& response) {
    YAML::Node node = parse_sequence(response);
    std::vector<FunctionSpec> fns;
    for (const auto& item : node) {
        if (!item.IsMap() || !item["name"])
            throw ExtractionParseError("function entry missing 'name'");
        FunctionSpec fn;
        fn.name = item["name"].as<std::string>();
        if (item["params"]) {
            if (!item["params"].IsSequence())
                throw ExtractionParseError("'params' must be a sequence");
            for (const auto& p : item["params"]) {
                if (!p.IsMap() || !p["name"] || !p["type"])
                    throw ExtractionParseError("param entry needs 'name' and 'type'");
                fn.params.push_back({p["name"].as<std::string>(), p["type"].as<std::string>()});
            }
        }
        if (item["returns"] && !item["returns"].IsNull())
            fn.returns = item["returns"].as<std::string>();
        if (item["optional"]) fn.optional_flag = item["optional"].as<bool>(false);
        fns.push_back(std::move(fn));
    }
    return fns;
}

std::vector<EventSpec> parse_event_list(const std::string& response) {
    YAML::Node node = parse_sequence(response);
    std::vector<EventSpec> evs;
    for (const auto& item : node) {
        if (!item.IsMap() || !item["name"])
            throw ExtractionParseError("event entry missing 'name'");
        EventSpec ev;
        ev.name = item["name"].as<std::string>();
        if (item["params"]) {
            if (!item["params"].IsSequence())
                throw ExtractionParseError("'params' must be a sequence");
            for (const auto& p : item["params"]) {
                if (!p.IsMap() || !p["name"] || !p["type"])
                    throw ExtractionParseError("param entry needs 'name' and 'type'");
                RuleEventParam param;
                param.name = p["name"].as<std::string>();
                param.type = p["type"].as<std::string>();
                if (p["indexed"]) param.indexed = p["indexed"].as<bool>(false);
                ev.params.push_back(std::move(param));
            }
        }
        evs.push_back(std::move(ev));
    }
    return evs;
}

bool lookup(const std::vector<std::pair<std::string, int>>& table, const std::string& key,
            int* out) {
    for (const auto& [name, value] : table)
        if (name == key) {
            *out = value;
            return true;
        }
    return false;
}

const std::vector<std::pair<std::string, int>> kCategories = {
    {"privilege-check", static_cast<int>(ContentCategory::PrivilegeCheck)},
    {"functionality", static_cast<int>(ContentCategory::Functionality)},
    {"usage", static_cast<int>(ContentCategory::Usage)},
    {"logging", static_cast<int>(ContentCategory::Logging)}};
const std::vector<std::pair<std::string, int>> kImpacts = {
    {"high", static_cast<int>(Impact::High)},
    {"medium", static_cast<int>(Impact::Medium)},
    {"low", static_cast<int>(Impact::Low)}};
const std::vector<std::pair<std::string, int>> kConditionKinds = {
    {"if", static_cast<int>(ConditionKind::If)},
    {"unless", static_cast<int>(ConditionKind::Unless)},
    {"when", static_cast<int>(ConditionKind::When)},
    {"always", static_cast<int>(ConditionKind::Always)}};
const std::vector<std::pair<std::string, int>> kPolarities = {
    {"must-emit", static_cast<int>(EventPolarity::MustEmit)},
    {"must-not-emit", static_cast<int>(EventPolarity::MustNotEmit)}};

bool legal_pair(ContentCategory c, Impact i) {
    switch (c) {
        case ContentCategory::PrivilegeCheck: return i == Impact::High;
        case ContentCategory::Functionality: return i == Impact::High || i == Impact::Medium;
        case ContentCategory::Usage: return i == Impact::Medium || i == Impact::High;
        case ContentCategory::Logging: return i == Impact::Low;
    }
    return false;
}

std::string group_slug(RuleGroup g) {
    std::string s = to_string(g);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Turns one YAML rule item into an ErcRule, or records a rejection. Item-level
// problems never abort the extraction ("no silent loss").
std::vector<ErcRule> parse_rule_items(const YAML::Node& node, RuleGroup group,
                                      const std::string& erc_id, const std::string& owner,
                                      RuleScope scope, const std::string& event_name,
                                      std::vector<RejectedRule>* rejected) {
    std::vector<ErcRule> rules;
    int index = 0;
    auto reject = [&](const YAML::Node& item, const std::string& reason) {
        if (rejected) rejected->push_back({owner, reason, YAML::Dump(item)});
    };
    for (const auto& item : node) {
        if (!item.IsMap()) {
            reject(item, "rule entry is not a map");
            continue;
        }
        ErcRule rule;
        rule.group = group;
        rule.scope = scope;
        rule.review = Review::Pending;
        if (!item["text"]) {
            reject(item, "missing 'text'");
            continue;
        }
        rule.text = item["text"].as<std::string>();

        int enum_value = 0;
        std::string category = item["category"] ? item["category"].as<std::string>() : "usage";
        if (!lookup(kCategories, category, &enum_value)) {
            reject(item, "unknown category '" + category + "'");
            continue;
        }
        rule.content_category = static_cast<ContentCategory>(enum_value);
        std::string impact = item["impact"] ? item["impact"].as<std::string>() : "medium";
        if (!lookup(kImpacts, impact, &enum_value)) {
            reject(item, "unknown impact '" + impact + "'");
            continue;
        }
        rule.impact = static_cast<Impact>(enum_value);
        if (!legal_pair(rule.content_category, rule.impact)) {
            reject(item, "illegal impact/category pair " + category + "/" + impact);
            continue;
        }
        if (item["compound"]) rule.compound = item["compound"].as<bool>(false);
        if (item["pattern"]) rule.pattern_id = item["pattern"].as<std::string>();

        if (group == RuleGroup::CP) {
            if (!item["condition"] || !item["action"]) {
                reject(item, "CP rule needs 'condition' and 'action'");
                continue;
            }
            CpPayload p;
            p.condition = item["condition"].as<std::string>();
            p.action = item["action"].as<std::string>();
            std::string kind =
                item["condition_type"] ? item["condition_type"].as<std::string>() : "always";
            if (!lookup(kConditionKinds, kind, &enum_value)) {
                reject(item, "unknown condition_type '" + kind + "'");
                continue;
            }
            p.condition_type = static_cast<ConditionKind>(enum_value);
            rule.payload = p;
        } else if (group == RuleGroup::EP) {
            EpPayload p;
            p.condition = item["condition"] ? item["condition"].as<std::string>() : "";
            p.event = event_name.empty()
                          ? (item["event"] ? item["event"].as<std::string>() : "")
                          : event_name;
            if (p.event.empty()) {
                reject(item, "EP rule needs 'event'");
                continue;
            }
            std::string polarity =
                item["polarity"] ? item["polarity"].as<std::string>() : "must-emit";
            if (!lookup(kPolarities, polarity, &enum_value)) {
                reject(item, "unknown polarity '" + polarity + "'");
                continue;
            }
            p.polarity = static_cast<EventPolarity>(enum_value);
            rule.payload = p;
        } else if (group == RuleGroup::RP) {
            if (!item["return_semantics"]) {
                reject(item, "RP rule needs 'return_semantics'");
                continue;
            }
            rule.payload = RpPayload{item["return_semantics"].as<std::string>()};
        } else if (group == RuleGroup::AP) {
            if (!item["assignment"]) {
                reject(item, "AP rule needs 'assignment'");
                continue;
            }
            rule.payload = ApPayload{item["assignment"].as<std::string>()};
        }
        rule.id = erc_id + "." + owner + "." + group_slug(group) + std::to_string(++index);
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::string rule_format_description(RuleGroup group) {
    std::string common =
        "  text: <the verbatim sentence from the document>\n"
        "  category: privilege-check | functionality | usage | logging\n"
        "  impact: high | medium | low\n"
        "  compound: true only when the rule applies under a prerequisite that may "
        "be absent from a given contract\n";
    switch (group) {
        case RuleGroup::CP:
            return "- condition: <the condition>\n  condition_type: if | unless | when | always\n"
                   "  action: <the required action>\n" + common;
        case RuleGroup::EP:
            return "- condition: <when emission is required or forbidden>\n"
                   "  event: <event name>\n  polarity: must-emit | must-not-emit\n" + common;
        case RuleGroup::RP:
            return "- return_semantics: <how the return value must be generated>\n" + common;
        case RuleGroup::AP:
            return "- assignment: <which field must be assigned and how>\n" + common;
        case RuleGroup::DECL:
            break;
    }
    return common;
}

std::string patterns_text(RuleGroup group) {
    std::ostringstream s;
    for (const auto& [id, pattern] : prompts::linguistic_patterns(group))
        s << "  " << id << ": " << pattern << "\n";
    return s.str();
}

}  // namespace

ErcDocument load_erc_document(std::string erc_id, std::string body) {
    ErcDocument doc;
    doc.erc_id = std::move(erc_id);
    doc.body = std::move(body);
    auto lines = split_lines(doc.body);
    int total = static_cast<int>(lines.size());
    if (total == 0) {
        doc.body = "\n";
        lines.push_back("");
        total = 1;
    }
    std::vector<int> heading_lines;
    for (int i = 1; i <= total; ++i)
        if (!lines[i - 1].empty() && lines[i - 1][0] == '#') heading_lines.push_back(i);
    int cursor = 1;
    if (heading_lines.empty() || heading_lines.front() > 1) {
        int end = heading_lines.empty() ? total : heading_lines.front() - 1;
        doc.sections.push_back({"", cursor, end});
        cursor = end + 1;
    }
    for (size_t i = 0; i < heading_lines.size(); ++i) {
        int first = heading_lines[i];
        int last = i + 1 < heading_lines.size() ? heading_lines[i + 1] - 1 : total;
        std::string heading = lines[first - 1];
        while (!heading.empty() && (heading[0] == '#' || heading[0] == ' '))
            heading.erase(heading.begin());
        doc.sections.push_back({heading, first, last});
    }
    return doc;
}

std::pair<std::vector<FunctionSpec>, std::vector<EventSpec>> extract_interface(
    const ErcDocument& doc, LlmGateway& llm, std::vector<ExtractLogEntry>* log) {
    const std::string fn_instructions =
        "Enumerate every function this standard declares for the token interface. "
        "Respond with only a YAML sequence, one item per function:\n"
        "- name: <function name>\n"
        "  params:\n"
        "    - {name: <param name>, type: <solidity type>}\n"
        "  returns: <solidity return type, omit when the function returns nothing>\n"
        "  optional: true when the document marks the function OPTIONAL\n";
    const std::string ev_instructions =
        "Enumerate every event this standard declares. Respond with only a YAML "
        "sequence, one item per event:\n"
        "- name: <event name>\n"
        "  params:\n"
        "    - {name: <param name>, type: <solidity type>, indexed: true|false}\n";

    int overhead = estimate_tokens(prompts::kSystemPersona) +
                   std::max(estimate_tokens(fn_instructions), estimate_tokens(ev_instructions)) +
                   64;
    auto bodies = doc_bodies(doc, llm, overhead);

    std::vector<FunctionSpec> functions;
    std::vector<EventSpec> events;
    for (const auto& body : bodies) {
        std::string fn_prompt = "Extraction target: interface functions (" + doc.erc_id +
                                ")\n\nERC document:\n" + body + "\n" + fn_instructions;
        auto fns = ask(llm, fn_prompt, parse_function_list, log, "interface", "functions");
        for (auto& fn : fns) {
            bool dup = std::any_of(functions.begin(), functions.end(),
                                   [&](const FunctionSpec& f) { return f.name == fn.name; });
            if (!dup) functions.push_back(std::move(fn));
        }
        std::string ev_prompt = "Extraction target: interface events (" + doc.erc_id +
                                ")\n\nERC document:\n" + body + "\n" + ev_instructions;
        auto evs = ask(llm, ev_prompt, parse_event_list, log, "interface", "events");
        for (auto& ev : evs) {
            bool dup = std::any_of(events.begin(), events.end(),
                                   [&](const EventSpec& e) { return e.name == ev.name; });
            if (!dup) events.push_back(std::move(ev));
        }
    }
    return {std::move(functions), std::move(events)};
}

std::vector<ErcRule> extract_rules_for_function(const ErcDocument& doc, const FunctionSpec& fn,
                                                RuleGroup group, LlmGateway& llm,
                                                std::vector<ExtractLogEntry>* log,
                                                std::vector<RejectedRule>* rejected) {
    std::ostringstream fixed;
    fixed << "Extraction target: function " << fn.name << ", group " << to_string(group)
          << " (" << doc.erc_id << ")\n\n"
          << "Function declaration:\n" << render_decl(fn) << "\n\n"
          << prompts::group_explanation(group) << "\n\n"
          << "Typical phrasings of " << to_string(group) << " rules:\n"
          << patterns_text(group) << "\n"
          << "Extract every " << to_string(group) << " rule the document states for this "
          << "function. Respond with only a YAML sequence, one item per rule:\n"
          << rule_format_description(group)
          << "Respond with an empty sequence ([]) when the document states no such rule.\n";

    int overhead = estimate_tokens(prompts::kSystemPersona) + estimate_tokens(fixed.str()) + 64;
    auto bodies = doc_bodies(doc, llm, overhead);

    // Under segmentation, extract only from segments that mention the function.
    std::vector<std::string> relevant;
    if (bodies.size() > 1) {
        for (const auto& b : bodies)
            if (b.find(fn.name) != std::string::npos) relevant.push_back(b);
        if (relevant.empty()) relevant.push_back(bodies.front());
    } else {
        relevant = bodies;
    }

    std::vector<ErcRule> rules;
    for (const auto& body : relevant) {
        std::string prompt = "ERC document:\n" + body + "\n" + fixed.str();
        auto node = ask(llm, prompt, parse_sequence, log, fn.name, to_string(group));
        auto batch = parse_rule_items(node, group, doc.erc_id, fn.name, RuleScope::Function,
                                      "", rejected);
        for (auto& r : batch) {
            r.id = doc.erc_id + "." + fn.name + "." + group_slug(group) +
                   std::to_string(rules.size() + 1);
            rules.push_back(std::move(r));
        }
    }
    return rules;
}

std::vector<ErcRule> extract_event_rules(const ErcDocument& doc, const EventSpec& ev,
                                         LlmGateway& llm, std::vector<ExtractLogEntry>* log,
                                         std::vector<RejectedRule>* rejected) {
    std::ostringstream fixed;
    fixed << "Extraction target: event " << ev.name << " (" << doc.erc_id << ")\n\n"
          << "Event declaration:\n" << render_event_decl(ev) << "\n\n"
          << prompts::group_explanation(RuleGroup::EP) << "\n\n"
          << "Typical phrasings of EP rules:\n" << patterns_text(RuleGroup::EP) << "\n"
          << "Extract every rule about when this event must or must not be emitted. "
          << "Respond with only a YAML sequence, one item per rule:\n"
          << rule_format_description(RuleGroup::EP)
          << "Respond with an empty sequence ([]) when the document states no such rule.\n";

    int overhead = estimate_tokens(prompts::kSystemPersona) + estimate_tokens(fixed.str()) + 64;
    auto bodies = doc_bodies(doc, llm, overhead);
    std::vector<std::string> relevant;
    if (bodies.size() > 1) {
        for (const auto& b : bodies)
            if (b.find(ev.name) != std::string::npos) relevant.push_back(b);
        if (relevant.empty()) relevant.push_back(bodies.front());
    } else {
        relevant = bodies;
    }

    std::vector<ErcRule> rules;
    for (const auto& body : relevant) {
        std::string prompt = "ERC document:\n" + body + "\n" + fixed.str();
        auto node = ask(llm, prompt, parse_sequence, log, ev.name, "EP-event");
        auto batch = parse_rule_items(node, RuleGroup::EP, doc.erc_id, ev.name,
                                      RuleScope::Event, ev.name, rejected);
        for (auto& r : batch) {
            r.id = doc.erc_id + "." + ev.name + ".ep" + std::to_string(rules.size() + 1);
            rules.push_back(std::move(r));
        }
    }
    return rules;
}

IngestResult build_ruleset(const ErcDocument& doc, LlmGateway& llm) {
    IngestResult result;
    result.ruleset.erc_id = doc.erc_id;

    auto [functions, events] = extract_interface(doc, llm, &result.log);
    if (functions.empty() && events.empty()) {
        result.warnings.push_back("document yielded no function or event declarations");
        return result;
    }

    const RuleGroup kGroups[] = {RuleGroup::CP, RuleGroup::EP, RuleGroup::RP, RuleGroup::AP};
    for (auto& fn : functions) {
        ErcRule decl;
        decl.id = doc.erc_id + "." + fn.name + ".decl";
        decl.group = RuleGroup::DECL;
        decl.content_category = ContentCategory::Usage;
        decl.impact = Impact::Medium;
        decl.scope = RuleScope::Function;
        decl.text = "Declares " + decl_signature(fn);
        decl.payload = DeclPayload{decl_signature(fn)};
        decl.review = Review::Pending;
        fn.rules.push_back(std::move(decl));
        for (RuleGroup group : kGroups) {
            try {
                auto rules = extract_rules_for_function(doc, fn, group, llm, &result.log,
                                                        &result.rejected);
                for (auto& r : rules) fn.rules.push_back(std::move(r));
            } catch (const ExtractionParseError& ex) {
                throw ExtractionParseError("function " + fn.name + ", group " +
                                           to_string(group) + ": " + ex.what());
            }
        }
        result.ruleset.functions.push_back(std::move(fn));
    }
    for (auto& ev : events) {
        ErcRule decl;
        decl.id = doc.erc_id + "." + ev.name + ".decl";
        decl.group = RuleGroup::DECL;
        decl.content_category = ContentCategory::Logging;
        decl.impact = Impact::Low;
        decl.scope = RuleScope::Event;
        decl.text = "Declares " + decl_event_signature(ev);
        decl.payload = DeclPayload{decl_event_signature(ev)};
        decl.review = Review::Pending;
        ev.rules.push_back(std::move(decl));
        try {
            auto rules = extract_event_rules(doc, ev, llm, &result.log, &result.rejected);
            for (auto& r : rules) ev.rules.push_back(std::move(r));
        } catch (const ExtractionParseError& ex) {
            throw ExtractionParseError("event " + ev.name + ": " + ex.what());
        }
        result.ruleset.events.push_back(std::move(ev));
    }
    return result;
}

std::string render_extraction_log(const IngestResult& result) {
    std::ostringstream out;
    for (const auto& e : result.log)
        out << e.target << "\t" << e.group << "\t" << e.token_estimate << "\t" << e.outcome
            << "\n";
    for (const auto& r : result.rejected)
        out << r.target << "\trejected\t-\t" << r.reason << "\n";
    for (const auto& w : result.warnings) out << "-\twarning\t-\t" << w << "\n";
    return out.str();
}

}  // namespace sentinel
