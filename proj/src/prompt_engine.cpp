#include "sentinel/prompt_engine.hpp"

#include <sstream>

#include "sentinel/errors.hpp"

namespace sentinel {

namespace prompts {

const char* kSystemPersona =
    "You are an expert Solidity security auditor. You verify whether smart contract "
    "code complies with specific rules taken from Ethereum ERC standards. Base every "
    "conclusion strictly on the code you are shown. Be precise and concise.";

const char* group_explanation(RuleGroup group) {
    switch (group) {
        case RuleGroup::CP:
            return "CP rules pair a condition with an action: the implementation must "
                   "perform (or refrain from) an action such as throwing, reverting, or "
                   "calling a function, depending on whether a stated condition holds. The "
                   "condition check may be explicit (an if or require statement) or "
                   "implicit (for example an arithmetic underflow that reverts).";
        case RuleGroup::EP:
            return "EP rules govern event emission: under a stated condition an event must "
                   "be emitted, or must not be emitted. Implementations and violations "
                   "revolve around the emit keyword (or, before Solidity 0.5, an event "
                   "invoked like a function call).";
        case RuleGroup::RP:
            return "RP rules describe how a function must generate its return value, for "
                   "example which stored quantity it reports or what a boolean result must "
                   "mean. Implementations revolve around return statements.";
        case RuleGroup::AP:
            return "AP rules describe required state updates: which contract field must be "
                   "assigned and how. Implementations revolve around assignments to "
                   "contract fields.";
        case RuleGroup::DECL:
            return "DECL rules fix function and event declarations and are checked "
                   "statically.";
    }
    return "";
}

std::vector<std::pair<std::string, std::string>> linguistic_patterns(RuleGroup group) {
    switch (group) {
        case RuleGroup::CP:
            return {{"CP1", "[subject] [must] [action] {condition}"},
                    {"CP2", "[action] [must] result in revert"},
                    {"CP3", "Caller must be approved to [action]"},
                    {"CP4", "[must] revert [condition]"},
                    {"CP5", "Caller [must] be [role]"},
                    {"CP6", "[action] is considered invalid"},
                    {"CP7", "[condition] [subject] [must] call [function]"}};
        case RuleGroup::EP:
            return {{"EP1", "[must] [action] [event] {condition}"},
                    {"EP2", "[event] emits {condition}"},
                    {"EP3", "{condition} without emitting [event]"}};
        case RuleGroup::RP:
            return {{"RP1", "return"}, {"RP2", "@return/@notice"}};
        case RuleGroup::AP:
            return {{"AP1", "[subject] [must] [assign]"}};
        case RuleGroup::DECL:
            return {};
    }
    return {};
}

}  // namespace prompts

std::string to_string(PromptStage s) {
    switch (s) {
        case PromptStage::Single: return "single";
        case PromptStage::ConditionProbe: return "condition-probe";
        case PromptStage::ActionProbe: return "action-probe";
    }
    return "?";
}

std::string to_string(VerdictOutcome o) {
    switch (o) {
        case VerdictOutcome::Compliant: return "compliant";
        case VerdictOutcome::Violation: return "violation";
        case VerdictOutcome::ConditionAbsent: return "condition-absent";
        case VerdictOutcome::ConditionPresent: return "condition-present";
        case VerdictOutcome::Uncertain: return "uncertain";
    }
    return "?";
}

int estimate_tokens(std::string_view text) {
    return static_cast<int>((text.size() + 3) / 4);
}

std::string verdict_instruction(PromptStage stage) {
    if (stage == PromptStage::ConditionProbe)
        return "End your answer with exactly one line: \"VERDICT: PRESENT\" or "
               "\"VERDICT: ABSENT\".";
    return "End your answer with exactly one line: \"VERDICT: COMPLIANT\" or "
           "\"VERDICT: VIOLATION\".";
}

std::string strict_retry_instruction(PromptStage stage) {
    return "Your previous answer did not contain a verdict line. Answer again. " +
           verdict_instruction(stage) + " Output nothing after the verdict line.";
}

namespace {

std::string condition_phrase(ConditionKind kind, const std::string& condition) {
    switch (kind) {
        case ConditionKind::If: return "if \"" + condition + "\"";
        case ConditionKind::Unless: return "unless \"" + condition + "\"";
        case ConditionKind::When: return "when \"" + condition + "\"";
        case ConditionKind::Always: return "in all cases (" + condition + ")";
    }
    return condition;
}

std::string group_question(const ErcRule& rule, const std::string& fn) {
    std::ostringstream q;
    if (const auto* cp = std::get_if<CpPayload>(&rule.payload)) {
        q << "Examine whether the " << fn << "() function, together with its related "
          << "code, performs the required action: " << cp->action << " "
          << condition_phrase(cp->condition_type, cp->condition) << ".";
    } else if (const auto* ep = std::get_if<EpPayload>(&rule.payload)) {
        if (ep->polarity == EventPolarity::MustEmit)
            q << "Examine whether the " << fn << "() function emits the " << ep->event
              << " event when \"" << ep->condition << "\".";
        else
            q << "Examine whether the " << fn << "() function avoids emitting the "
              << ep->event << " event when \"" << ep->condition << "\".";
    } else if (const auto* rp = std::get_if<RpPayload>(&rule.payload)) {
        q << "Examine whether the return value of the " << fn << "() function is "
          << "generated as required: " << rp->return_semantics << ".";
    } else if (const auto* ap = std::get_if<ApPayload>(&rule.payload)) {
        q << "Examine whether the " << fn << "() function updates contract state as "
          << "required: " << ap->assignment << ".";
    }
    return q.str();
}

// The prerequisite half of a compound rule.
std::string compound_condition(const ErcRule& rule) {
    if (const auto* cp = std::get_if<CpPayload>(&rule.payload)) return cp->condition;
    if (const auto* ep = std::get_if<EpPayload>(&rule.payload)) return ep->condition;
    return "";
}

PromptTask build_task(const ErcRule& rule, const CodeSlice& slice, const std::string& fn,
                      const std::string& question, PromptStage stage, int budget) {
    PromptTask task;
    task.rule_id = rule.id;
    task.stage = stage;

    std::ostringstream user;
    user << "Rule " << rule.id << " (group " << to_string(rule.group) << ") for function "
         << fn << ".\n\n"
         << question << "\n";
    if (rule.one_shot && stage != PromptStage::ConditionProbe)
        user << "\nExample for reference:\n" << *rule.one_shot << "\n";
    user << "\nCode under audit:\n" << slice.rendered << "\n\n" << verdict_instruction(stage);

    task.messages.push_back({"system", prompts::kSystemPersona});
    task.messages.push_back({"user", user.str()});
    for (const auto& m : task.messages) task.token_estimate += estimate_tokens(m.text);

    int slice_lines = static_cast<int>(slice.reasons.size());
    if (slice_lines > 200)
        task.warnings.push_back("slice has " + std::to_string(slice_lines) +
                                " lines; responses degrade beyond 200");
    if (task.token_estimate > budget) throw BudgetExceeded(task.token_estimate, budget);
    return task;
}

}  // namespace

PromptTask specialize_prompt(const ErcRule& rule, const CodeSlice& slice,
                             const std::string& anchor_function, int budget) {
    return build_task(rule, slice, anchor_function, group_question(rule, anchor_function),
                      PromptStage::Single, budget);
}

CompoundPlan plan_compound(const ErcRule& rule, const CodeSlice& slice,
                           const std::string& anchor_function, int budget) {
    std::string condition_question =
        "Determine only whether the following prerequisite is present in the code of the " +
        anchor_function + "() function or its related code: \"" + compound_condition(rule) +
        "\". Do not judge compliance yet.";
    CompoundPlan plan;
    plan.condition_task = build_task(rule, slice, anchor_function, condition_question,
                                     PromptStage::ConditionProbe, budget);
    plan.make_action_task = [rule, slice, anchor_function, budget]() {
        return build_task(rule, slice, anchor_function,
                          group_question(rule, anchor_function), PromptStage::ActionProbe,
                          budget);
    };
    return plan;
}

Verdict parse_verdict(const std::string& response, PromptStage stage) {
    std::istringstream in(response);
    std::string line;
    std::string token;
    std::string before;
    size_t verdict_end = std::string::npos;
    size_t offset = 0;
    while (std::getline(in, line)) {
        size_t pos = line.find("VERDICT:");
        if (pos != std::string::npos) {
            std::string rest = line.substr(pos + 8);
            std::istringstream word(rest);
            std::string w;
            if (word >> w) {
                token = w;
                verdict_end = offset + pos;
            }
        }
        offset += line.size() + 1;
    }
    if (token.empty()) throw UnparseableVerdict("no VERDICT line in response");

    Verdict v;
    v.raw = response;
    if (verdict_end != std::string::npos && verdict_end > 0) {
        before = response.substr(0, verdict_end);
        while (!before.empty() && (before.back() == '\n' || before.back() == ' '))
            before.pop_back();
    }
    v.explanation = before;

    if (stage == PromptStage::ConditionProbe) {
        if (token == "PRESENT") v.outcome = VerdictOutcome::ConditionPresent;
        else if (token == "ABSENT") v.outcome = VerdictOutcome::ConditionAbsent;
        else throw UnparseableVerdict("unexpected verdict token '" + token + "'");
    } else {
        if (token == "COMPLIANT") v.outcome = VerdictOutcome::Compliant;
        else if (token == "VIOLATION") v.outcome = VerdictOutcome::Violation;
        else throw UnparseableVerdict("unexpected verdict token '" + token + "'");
    }
    return v;
}

}  // namespace sentinel
