#include "sentinel/audit.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sentinel/errors.hpp"

namespace sentinel {

namespace {

// Verdict for one prompt task, retrying once with a stricter instruction when
// the response carries no verdict line.
Verdict run_task(LlmGateway& gateway, PromptTask task) {
    std::string response = gateway.complete(task.messages);
    try {
        return parse_verdict(response, task.stage);
    } catch (const UnparseableVerdict&) {
    }
    task.messages.back().text += "\n\n" + strict_retry_instruction(task.stage);
    response = gateway.complete(task.messages);
    try {
        return parse_verdict(response, task.stage);
    } catch (const UnparseableVerdict&) {
        Verdict v;
        v.outcome = VerdictOutcome::Uncertain;
        v.raw = response;
        v.explanation = "no parseable verdict after retry";
        return v;
    }
}

struct ProbeContext {
    AuditReport* report;
    const std::string* contract_name;
    LlmGateway* gateway;
    int budget;
};

void probe_rule(ProbeContext& ctx, const ErcRule& rule, const CodeSlice& slice,
                const std::string& fn_name, int fn_line) {
    auto add_finding = [&](const std::string& explanation,
                           std::optional<std::pair<VerdictOutcome, VerdictOutcome>> trace) {
        Finding f;
        f.rule_id = rule.id;
        f.impact = rule.impact;
        f.category = rule.content_category;
        f.contract = *ctx.contract_name;
        f.function = fn_name;
        f.line = fn_line;
        f.explanation = explanation;
        f.source = "llm";
        f.rule_text = rule.text;
        f.stage_trace = trace;
        ctx.report->findings.push_back(std::move(f));
    };
    auto add_uncertain = [&](const std::string& reason) {
        ctx.report->uncertain.push_back({rule.id, fn_name, reason});
    };

    try {
        if (rule.compound) {
            CompoundPlan plan = plan_compound(rule, slice, fn_name, ctx.budget);
            Verdict condition = run_task(*ctx.gateway, plan.condition_task);
            if (condition.outcome == VerdictOutcome::Uncertain) {
                add_uncertain("condition probe: " + condition.explanation);
                return;
            }
            if (condition.outcome == VerdictOutcome::ConditionAbsent) return;
            Verdict action = run_task(*ctx.gateway, plan.make_action_task());
            if (action.outcome == VerdictOutcome::Uncertain) {
                add_uncertain("action probe: " + action.explanation);
            } else if (action.outcome == VerdictOutcome::Violation) {
                add_finding(action.explanation,
                            std::make_pair(condition.outcome, action.outcome));
            }
        } else {
            PromptTask task = specialize_prompt(rule, slice, fn_name, ctx.budget);
            Verdict v = run_task(*ctx.gateway, task);
            if (v.outcome == VerdictOutcome::Uncertain)
                add_uncertain(v.explanation);
            else if (v.outcome == VerdictOutcome::Violation)
                add_finding(v.explanation, std::nullopt);
        }
    } catch (const BudgetExceeded& ex) {
        add_uncertain(std::string("BudgetExceeded: ") + ex.what());
    }
}

std::string impact_heading(Impact i) {
    switch (i) {
        case Impact::High: return "HIGH";
        case Impact::Medium: return "MEDIUM";
        case Impact::Low: return "LOW";
    }
    return "?";
}

}  // namespace

AuditReport audit_contract(const std::string& source, const std::string& path,
                           const ErcRuleSet& rules, LlmGateway& gateway) {
    auto issues = validate_ruleset(rules);
    if (!issues.empty())
        throw ValidationError(issues.front().rule_id,
                              "rule set not approved for auditing: " + issues.front().reason);

    ContractModel model = parse_contract(source);
    if (model.contracts.empty()) throw SyntaxError(1, "no contract declaration found");
    const std::string contract_name = model.contracts[model.main_contract()].name;

    AuditReport report;
    report.contract_path = path;
    report.contract_sha256 = sha256_hex(source);
    report.ruleset_id = rules.erc_id;
    report.model = gateway.config().model;

    size_t ledger_start = gateway.ledger().size();

    // Static declaration findings.
    auto decl_findings = check_declarations(model, rules);
    for (const auto& d : decl_findings) {
        const ErcRule* rule = rules.find_rule(d.rule_id);
        Finding f;
        f.rule_id = d.rule_id;
        if (rule) {
            f.impact = rule->impact;
            f.category = rule->content_category;
            f.rule_text = rule->text;
        }
        f.contract = contract_name;
        f.line = d.location;
        f.explanation = to_string(d.kind) + ": " + d.detail;
        f.source = "static";
        report.findings.push_back(std::move(f));
    }

    // Bind the ERC surface and probe semantic rules per bound public function.
    auto bindings = match_erc_surface(model, rules);
    ProbeContext ctx{&report, &contract_name, &gateway, gateway.config().input_budget};

    struct BoundFn {
        int fn_index;
        const FunctionSpec* spec;
    };
    std::vector<BoundFn> bound;
    for (const auto& b : bindings) {
        if (!b.fn_index) continue;  // absent or satisfied by an auto-getter
        bound.push_back({*b.fn_index, b.spec});
        if (b.ambiguous)
            for (int extra : b.candidates)
                if (extra != *b.fn_index) bound.push_back({extra, b.spec});
    }

    std::set<std::pair<std::string, std::string>> probed;  // (rule id, function)
    for (const auto& bf : bound) {
        const FunctionDef& fn = model.functions[bf.fn_index];
        CodeSlice slice = slice_public_function(model, bf.fn_index);
        auto probe_once = [&](const ErcRule& rule) {
            if (rule.group == RuleGroup::DECL) return;
            if (!probed.insert({rule.id, fn.name}).second) return;
            probe_rule(ctx, rule, slice, fn.name, fn.body.first);
        };
        for (const auto& rule : bf.spec->rules) probe_once(rule);
        // Whole-contract and event-emission obligations apply to every public
        // function; findings are de-duplicated per (rule, function).
        for (const auto& rule : rules.contract_scope_rules) probe_once(rule);
        for (const auto& ev : rules.events)
            for (const auto& rule : ev.rules) probe_once(rule);
    }

    // Canonical order: source position of the named function, then rule id.
    auto fn_line = [&](const Finding& f) { return f.line.value_or(0); };
    std::stable_sort(report.findings.begin(), report.findings.end(),
                     [&](const Finding& a, const Finding& b) {
                         if (fn_line(a) != fn_line(b)) return fn_line(a) < fn_line(b);
                         return a.rule_id < b.rule_id;
                     });
    std::stable_sort(report.uncertain.begin(), report.uncertain.end(),
                     [](const UncertainEntry& a, const UncertainEntry& b) {
                         if (a.function != b.function) return a.function < b.function;
                         return a.rule_id < b.rule_id;
                     });

    for (const auto& f : report.findings) {
        if (f.impact == Impact::High) report.high++;
        else if (f.impact == Impact::Medium) report.medium++;
        else report.low++;
    }

    auto entries = gateway.ledger();
    for (size_t i = ledger_start; i < entries.size(); ++i) {
        report.prompts++;
        report.in_tokens += entries[i].in_tokens;
        report.out_tokens += entries[i].out_tokens;
    }
    return report;
}

std::string render_report(const AuditReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        nlohmann::ordered_json j;
        j["schema"] = "erc-sentinel/report/v1";
        j["contract"] = {{"path", report.contract_path}, {"sha256", report.contract_sha256}};
        j["ruleset"] = report.ruleset_id;
        j["model"] = report.model;
        j["summary"] = {{"high", report.high}, {"medium", report.medium}, {"low", report.low}};
        j["findings"] = nlohmann::ordered_json::array();
        for (const auto& f : report.findings) {
            nlohmann::ordered_json item;
            item["rule_id"] = f.rule_id;
            item["impact"] = to_string(f.impact);
            item["category"] = to_string(f.category);
            item["contract"] = f.contract;
            if (f.function) item["function"] = *f.function;
            else item["function"] = nullptr;
            if (f.line) item["line"] = *f.line;
            else item["line"] = nullptr;
            item["explanation"] = f.explanation;
            item["source"] = f.source;
            j["findings"].push_back(std::move(item));
        }
        j["uncertain"] = nlohmann::ordered_json::array();
        for (const auto& u : report.uncertain)
            j["uncertain"].push_back(
                {{"rule_id", u.rule_id}, {"function", u.function}, {"reason", u.reason}});
        j["usage"] = {{"prompts", report.prompts},
                      {"in_tokens", report.in_tokens},
                      {"out_tokens", report.out_tokens}};
        return j.dump(2) + "\n";
    }

    std::ostringstream out;
    out << "Audit report: " << report.contract_path << "\n";
    out << "ruleset: " << report.ruleset_id << "  model: " << report.model << "\n";
    out << "summary: high=" << report.high << " medium=" << report.medium
        << " low=" << report.low << "\n";
    for (Impact impact : {Impact::High, Impact::Medium, Impact::Low}) {
        bool any = false;
        for (const auto& f : report.findings) {
            if (f.impact != impact) continue;
            if (!any) {
                out << "\n" << impact_heading(impact) << "\n";
                any = true;
            }
            out << "  " << f.rule_id << " (" << to_string(f.category) << ", " << f.source
                << ") " << f.contract;
            if (f.function) out << "." << *f.function;
            if (f.line) out << ":" << *f.line;
            out << "\n";
            if (!f.rule_text.empty()) out << "    rule: " << f.rule_text << "\n";
            if (!f.explanation.empty()) {
                std::istringstream lines(f.explanation);
                std::string line;
                while (std::getline(lines, line)) out << "    " << line << "\n";
            }
        }
    }
    if (!report.uncertain.empty()) {
        out << "\nUNCERTAIN\n";
        for (const auto& u : report.uncertain)
            out << "  " << u.rule_id << " " << u.function << ": " << u.reason << "\n";
    }
    out << "\nusage: prompts=" << report.prompts << " in_tokens=" << report.in_tokens
        << " out_tokens=" << report.out_tokens << "\n";
    return out.str();
}

ReportDiff diff_reports(const AuditReport& a, const AuditReport& b) {
    if (a.ruleset_id != b.ruleset_id)
        throw RulesetMismatch("cannot diff reports for rulesets '" + a.ruleset_id + "' and '" +
                              b.ruleset_id + "'");
    auto keys = [](const AuditReport& r) {
        std::set<std::string> out;
        for (const auto& f : r.findings)
            out.insert(f.rule_id + "|" + f.contract + "|" + f.function.value_or(""));
        return out;
    };
    auto ka = keys(a), kb = keys(b);
    ReportDiff diff;
    for (const auto& k : kb)
        if (!ka.count(k)) diff.added.push_back(k);
    for (const auto& k : ka)
        if (!kb.count(k)) diff.removed.push_back(k);
    return diff;
}

}  // namespace sentinel
