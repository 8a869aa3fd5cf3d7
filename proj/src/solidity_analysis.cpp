#include <algorithm>
#include <cctype>
#include <cstring>
#include <deque>
#include <map>
#include <sstream>

#include "sentinel/solidity_model.hpp"
#include "solidity_internal.hpp"

namespace sentinel {

namespace {

using detail::Token;

bool is_identifier(const std::string& t) {
    return !t.empty() && (std::isalpha(static_cast<unsigned char>(t[0])) || t[0] == '_' ||
                          t[0] == '$');
}

std::vector<Token> tokens_for(const ContractModel& model) {
    std::string source;
    for (const auto& line : model.source_lines) {
        source += line;
        source += '\n';
    }
    return detail::tokenize(detail::blank_noncode(source));
}

// Token index range [begin, end) covering a source span.
std::pair<int, int> span_range(const std::vector<Token>& toks, SourceSpan span) {
    int begin = 0;
    while (begin < static_cast<int>(toks.size()) && toks[begin].line < span.first) ++begin;
    int end = begin;
    while (end < static_cast<int>(toks.size()) && toks[end].line <= span.last) ++end;
    return {begin, end};
}

int count_call_args(const std::vector<Token>& toks, int open_paren) {
    int close = detail::match_bracket(toks, open_paren);
    if (close < 0 || close == open_paren + 1) return 0;
    int depth = 0;
    int args = 1;
    for (int i = open_paren; i < close; ++i) {
        const std::string& t = toks[i].text;
        if (t == "(" || t == "[" || t == "{") ++depth;
        else if (t == ")" || t == "]" || t == "}") --depth;
        else if (t == "," && depth == 1) ++args;
    }
    return args;
}

int library_index(const ContractModel& model, const std::string& name) {
    for (size_t i = 0; i < model.contracts.size(); ++i)
        if (model.contracts[i].kind == ContractKind::Library && model.contracts[i].name == name)
            return static_cast<int>(i);
    return -1;
}

bool contract_uses_library(const ContractModel& model, int contract_index,
                           const std::string& library) {
    for (int idx : model.linearized_scope(contract_index)) {
        auto range = model.using_libraries.equal_range(idx);
        for (auto it = range.first; it != range.second; ++it)
            if (it->second == library) return true;
    }
    return false;
}

// name + arity lookup, derived-most wins; only definitions with bodies count.
int resolve_in_scope(const ContractModel& model, int contract_index, const std::string& name,
                     int arity) {
    for (int idx : model.linearized_scope(contract_index)) {
        for (size_t i = 0; i < model.functions.size(); ++i) {
            const auto& fn = model.functions[i];
            if (fn.contract_index != idx || fn.name != name || fn.is_modifier) continue;
            if (static_cast<int>(fn.params.size()) != arity) continue;
            if (!fn.has_body) continue;
            return static_cast<int>(i);
        }
    }
    return -1;
}

int resolve_modifier(const ContractModel& model, int contract_index, const std::string& name) {
    for (int idx : model.linearized_scope(contract_index)) {
        for (size_t i = 0; i < model.functions.size(); ++i) {
            const auto& fn = model.functions[i];
            if (fn.contract_index == idx && fn.name == name && fn.is_modifier && fn.has_body)
                return static_cast<int>(i);
        }
    }
    return -1;
}

int resolve_in_library(const ContractModel& model, int lib_index, const std::string& name,
                       int arity) {
    for (size_t i = 0; i < model.functions.size(); ++i) {
        const auto& fn = model.functions[i];
        if (fn.contract_index == lib_index && fn.name == name && !fn.is_modifier &&
            static_cast<int>(fn.params.size()) == arity && fn.has_body)
            return static_cast<int>(i);
    }
    return -1;
}

int skip_assembly(const std::vector<Token>& toks, int i, int end) {
    // cursor sits on "assembly"; advance past its block
    while (i < end && toks[i].text != "{") ++i;
    if (i >= end) return end;
    int close = detail::match_bracket(toks, i);
    return close < 0 ? end : close + 1;
}

}  // namespace

std::string to_string(SliceReason r) {
    switch (r) {
        case SliceReason::AnchorFn: return "anchor-fn";
        case SliceReason::Callee: return "callee";
        case SliceReason::Field: return "field";
        case SliceReason::ContractHeader: return "contract-header";
        case SliceReason::Comment: return "comment";
        case SliceReason::ClosingBrace: return "closing-brace";
    }
    return "?";
}

std::set<int> direct_callees(const ContractModel& model, int fn_index) {
    const FunctionDef& fn = model.functions[fn_index];
    std::set<int> out;

    for (const auto& mod_name : fn.modifiers) {
        int idx = resolve_modifier(model, fn.contract_index, mod_name);
        if (idx >= 0) out.insert(idx);
    }
    if (!fn.has_body) return out;

    const std::vector<Token> toks = tokens_for(model);
    auto [begin, end] = span_range(toks, fn.body);
    for (int i = begin; i < end; ++i) {
        const std::string& t = toks[i].text;
        if (t == "assembly") {
            i = skip_assembly(toks, i, end) - 1;
            continue;
        }
        if (!is_identifier(t)) continue;
        if (i + 1 >= end || toks[i + 1].text != "(") continue;
        if (detail::is_keyword(t) || detail::is_builtin_call(t)) continue;
        const std::string prev = i > 0 ? toks[i - 1].text : "";
        if (prev == "function" || prev == "modifier" || prev == "event" || prev == "emit")
            continue;

        int arity = count_call_args(toks, i + 1);
        int resolved = -1;
        if (prev == ".") {
            const std::string receiver = i >= 2 ? toks[i - 2].text : "";
            if (receiver == "this" || receiver == "super") {
                resolved = resolve_in_scope(model, fn.contract_index, t, arity);
            } else {
                int lib = library_index(model, receiver);
                if (lib >= 0) {
                    resolved = resolve_in_library(model, lib, t, arity);
                } else {
                    // attached library call through `using L for T`
                    for (size_t c = 0; c < model.contracts.size(); ++c) {
                        if (model.contracts[c].kind != ContractKind::Library) continue;
                        if (!contract_uses_library(model, fn.contract_index,
                                                   model.contracts[c].name))
                            continue;
                        int cand = resolve_in_library(model, static_cast<int>(c), t, arity + 1);
                        if (cand >= 0) { resolved = cand; break; }
                    }
                    if (resolved < 0) continue;  // external call, not related code
                }
            }
        } else {
            resolved = resolve_in_scope(model, fn.contract_index, t, arity);
            if (resolved < 0)
                model.warnings.push_back("unresolved call to '" + t + "' at line " +
                                         std::to_string(toks[i].line));
        }
        if (resolved >= 0 && resolved != fn_index) out.insert(resolved);
    }
    return out;
}

RelatedCode related_code(const ContractModel& model, int fn_index) {
    RelatedCode related;
    std::deque<int> queue{fn_index};
    std::set<int> visited{fn_index};
    while (!queue.empty()) {
        int current = queue.front();
        queue.pop_front();
        for (int callee : direct_callees(model, current)) {
            if (visited.insert(callee).second) queue.push_back(callee);
            related.callees.insert(callee);
        }
    }
    related.callees.erase(fn_index);  // recursion back to the anchor is not a callee

    const std::vector<Token> toks = tokens_for(model);
    std::vector<int> members(visited.begin(), visited.end());
    for (int member : members) {
        const FunctionDef& fn = model.functions[member];
        if (!fn.has_body) continue;
        auto [begin, end] = span_range(toks, fn.body);
        for (int i = begin; i < end; ++i) {
            const std::string& t = toks[i].text;
            if (t == "assembly") {
                i = skip_assembly(toks, i, end) - 1;
                continue;
            }
            if (!is_identifier(t) || detail::is_keyword(t)) continue;
            const std::string prev = i > 0 ? toks[i - 1].text : "";
            if (prev == ".") {
                const std::string receiver = i >= 2 ? toks[i - 2].text : "";
                if (receiver != "this") continue;
            }
            for (int scope_idx : model.linearized_scope(fn.contract_index)) {
                bool matched = false;
                for (size_t f = 0; f < model.fields.size(); ++f) {
                    if (model.fields[f].contract_index == scope_idx &&
                        model.fields[f].name == t) {
                        related.fields.insert(static_cast<int>(f));
                        matched = true;
                        break;
                    }
                }
                if (matched) break;
            }
        }
    }
    return related;
}

CodeSlice slice_public_function(const ContractModel& model, int fn_index) {
    const FunctionDef& anchor = model.functions[fn_index];
    RelatedCode related = related_code(model, fn_index);

    CodeSlice slice;
    slice.anchor = fn_index;

    auto classify_span = [&](SourceSpan span, SliceReason code_reason) {
        for (int line = span.first; line <= span.last; ++line) {
            if (slice.reasons.count(line)) continue;
            bool comment = line < static_cast<int>(model.comment_only.size()) &&
                           model.comment_only[line];
            slice.reasons[line] = comment ? SliceReason::Comment : code_reason;
        }
    };
    auto add_line = [&](int line, SliceReason reason) {
        if (line > 0 && !slice.reasons.count(line)) slice.reasons[line] = reason;
    };

    classify_span(anchor.body, SliceReason::AnchorFn);
    if (anchor.leading_comment) classify_span(*anchor.leading_comment, SliceReason::Comment);

    std::set<int> involved_contracts{anchor.contract_index};
    for (int callee : related.callees) {
        const FunctionDef& fn = model.functions[callee];
        classify_span(fn.body, SliceReason::Callee);
        if (fn.leading_comment) classify_span(*fn.leading_comment, SliceReason::Comment);
        involved_contracts.insert(fn.contract_index);
    }
    for (int field : related.fields) add_line(model.fields[field].decl_line, SliceReason::Field);
    for (int c : involved_contracts) {
        const ContractDecl& decl = model.contracts[c];
        classify_span(decl.header, SliceReason::ContractHeader);
        add_line(decl.closing_brace, SliceReason::ClosingBrace);
    }

    std::ostringstream rendered;
    bool first = true;
    for (const auto& [line, reason] : slice.reasons) {
        (void)reason;
        if (!first) rendered << '\n';
        first = false;
        if (line - 1 < static_cast<int>(model.source_lines.size()))
            rendered << model.source_lines[line - 1];
    }
    slice.rendered = rendered.str();
    return slice;
}

std::set<int> CodeSlice::lines() const {
    std::set<int> out;
    for (const auto& [line, reason] : reasons) {
        (void)reason;
        out.insert(line);
    }
    return out;
}

std::string normalize_type(const std::string& type) {
    std::string t;
    for (char c : type)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    // strip data-location suffixes that sneak into spec files
    for (const char* loc : {"memory", "calldata", "storage"}) {
        size_t n = std::strlen(loc);
        if (t.size() > n && t.compare(t.size() - n, n, loc) == 0) t.resize(t.size() - n);
    }
    if (t == "uint") return "uint256";
    if (t == "int") return "int256";
    if (t == "byte") return "bytes1";
    // normalize inner mapping types
    size_t open = t.find("mapping(");
    if (open != std::string::npos) {
        std::string out;
        size_t i = 0;
        while (i < t.size()) {
            if (std::isalnum(static_cast<unsigned char>(t[i]))) {
                size_t j = i;
                while (j < t.size() && (std::isalnum(static_cast<unsigned char>(t[j])))) ++j;
                std::string word = t.substr(i, j - i);
                if (word == "uint") word = "uint256";
                else if (word == "int") word = "int256";
                else if (word == "byte") word = "bytes1";
                out += word;
                i = j;
            } else {
                out += t[i];
                ++i;
            }
        }
        return out;
    }
    return t;
}

namespace {

// Getter signature synthesized by the compiler for a public state variable.
struct GetterSignature {
    std::vector<std::string> params;
    std::string returns;
};

GetterSignature getter_signature(const std::string& field_type) {
    GetterSignature sig;
    std::string t = normalize_type(field_type);
    while (t.rfind("mapping(", 0) == 0) {
        std::string inner = t.substr(8, t.size() - 9);
        size_t depth = 0, split = std::string::npos;
        for (size_t i = 0; i + 1 < inner.size(); ++i) {
            if (inner[i] == '(') ++depth;
            else if (inner[i] == ')') --depth;
            else if (depth == 0 && inner[i] == '=' && inner[i + 1] == '>') { split = i; break; }
        }
        if (split == std::string::npos) break;
        sig.params.push_back(inner.substr(0, split));
        t = inner.substr(split + 2);
    }
    if (t.size() > 2 && t.compare(t.size() - 2, 2, "[]") == 0) {
        sig.params.push_back("uint256");
        t.resize(t.size() - 2);
    }
    sig.returns = t;
    return sig;
}

}  // namespace

std::vector<SurfaceBinding> match_erc_surface(const ContractModel& model,
                                              const ErcRuleSet& rules) {
    std::vector<SurfaceBinding> bindings;
    int main = model.main_contract();
    std::vector<int> scope = main >= 0 ? model.linearized_scope(main) : std::vector<int>{};

    for (const auto& spec : rules.functions) {
        SurfaceBinding binding;
        binding.spec = &spec;

        for (int contract_idx : scope) {
            std::vector<int> candidates;
            for (size_t i = 0; i < model.functions.size(); ++i) {
                const auto& fn = model.functions[i];
                if (fn.contract_index != contract_idx || fn.is_modifier || !fn.has_body)
                    continue;
                if (fn.name != spec.name || fn.params.size() != spec.params.size()) continue;
                candidates.push_back(static_cast<int>(i));
            }
            if (candidates.size() == 1) {
                binding.fn_index = candidates[0];
            } else if (candidates.size() > 1) {
                binding.ambiguous = true;
                binding.candidates = candidates;
                binding.fn_index = candidates[0];
            }
            if (!candidates.empty()) break;
        }

        if (!binding.fn_index) {
            for (int contract_idx : scope) {
                for (size_t f = 0; f < model.fields.size(); ++f) {
                    const auto& field = model.fields[f];
                    if (field.contract_index != contract_idx || field.name != spec.name)
                        continue;
                    if (field.visibility != Visibility::Public) continue;
                    GetterSignature sig = getter_signature(field.type);
                    if (sig.params.size() != spec.params.size()) continue;
                    bool types_match = true;
                    for (size_t p = 0; p < sig.params.size(); ++p)
                        if (sig.params[p] != normalize_type(spec.params[p].type))
                            types_match = false;
                    if (spec.returns && sig.returns != normalize_type(*spec.returns))
                        types_match = false;
                    if (types_match) binding.field_index = static_cast<int>(f);
                }
                if (binding.field_index) break;
            }
        }
        bindings.push_back(binding);
    }
    return bindings;
}

std::vector<DeclFinding> check_declarations(const ContractModel& model,
                                            const ErcRuleSet& rules) {
    std::vector<DeclFinding> findings;
    std::vector<SurfaceBinding> bindings = match_erc_surface(model, rules);
    int main = model.main_contract();
    std::vector<int> scope = main >= 0 ? model.linearized_scope(main) : std::vector<int>{};

    for (size_t s = 0; s < rules.functions.size(); ++s) {
        const FunctionSpec& spec = rules.functions[s];
        const SurfaceBinding& binding = bindings[s];
        for (const auto& rule : spec.rules) {
            if (rule.group != RuleGroup::DECL) continue;
            if (!binding.fn_index && !binding.field_index) {
                if (!spec.optional_flag)
                    findings.push_back({rule.id, DeclFindingKind::MissingFunction,
                                        "function " + spec.name + " is not implemented",
                                        std::nullopt});
                continue;
            }
            if (binding.field_index) continue;  // auto-generated getter satisfies the rule
            const FunctionDef& fn = model.functions[*binding.fn_index];
            if (fn.visibility != Visibility::Public && fn.visibility != Visibility::External) {
                findings.push_back({rule.id, DeclFindingKind::SignatureMismatch,
                                    "function " + spec.name + " is not externally callable",
                                    fn.body.first});
                continue;
            }
            bool mismatch = false;
            std::string detail;
            for (size_t p = 0; p < spec.params.size(); ++p) {
                if (normalize_type(fn.params[p].type) != normalize_type(spec.params[p].type)) {
                    mismatch = true;
                    detail = "parameter " + std::to_string(p + 1) + " has type " +
                             fn.params[p].type + ", expected " + spec.params[p].type;
                    break;
                }
            }
            if (!mismatch && spec.returns) {
                std::string expected = normalize_type(*spec.returns);
                if (fn.returns.empty()) {
                    mismatch = true;
                    detail = "function " + spec.name + " declares no return value, expected " +
                             *spec.returns;
                } else if (normalize_type(fn.returns.front()) != expected) {
                    mismatch = true;
                    detail = "return type " + fn.returns.front() + ", expected " + *spec.returns;
                }
            }
            if (mismatch)
                findings.push_back({rule.id, DeclFindingKind::SignatureMismatch, detail,
                                    fn.body.first});
        }
    }

    for (const auto& spec : rules.events) {
        const EventDef* def = nullptr;
        for (int contract_idx : scope) {
            for (const auto& ev : model.events)
                if (ev.contract_index == contract_idx && ev.name == spec.name) { def = &ev; break; }
            if (def) break;
        }
        for (const auto& rule : spec.rules) {
            if (rule.group != RuleGroup::DECL) continue;
            if (!def) {
                findings.push_back({rule.id, DeclFindingKind::MissingEvent,
                                    "event " + spec.name + " is not declared", std::nullopt});
                continue;
            }
            if (def->params.size() != spec.params.size()) {
                findings.push_back({rule.id, DeclFindingKind::EventParamMismatch,
                                    "event " + spec.name + " declares " +
                                        std::to_string(def->params.size()) +
                                        " parameters, expected " +
                                        std::to_string(spec.params.size()),
                                    def->decl_line});
                continue;
            }
            for (size_t p = 0; p < spec.params.size(); ++p) {
                if (normalize_type(def->params[p].type) != normalize_type(spec.params[p].type)) {
                    findings.push_back({rule.id, DeclFindingKind::EventParamMismatch,
                                        "parameter " + std::to_string(p + 1) + " has type " +
                                            def->params[p].type + ", expected " +
                                            spec.params[p].type,
                                        def->decl_line});
                    break;
                }
                if (spec.params[p].indexed && !def->params[p].indexed) {
                    findings.push_back({rule.id, DeclFindingKind::MissingIndexed,
                                        "parameter " + spec.params[p].name +
                                            " must be declared indexed",
                                        def->decl_line});
                    break;
                }
                if (!spec.params[p].indexed && def->params[p].indexed) {
                    findings.push_back({rule.id, DeclFindingKind::EventParamMismatch,
                                        "parameter " + spec.params[p].name +
                                            " must not be declared indexed",
                                        def->decl_line});
                    break;
                }
            }
        }
    }
    return findings;
}

std::string to_string(DeclFindingKind k) {
    switch (k) {
        case DeclFindingKind::MissingFunction: return "missing-function";
        case DeclFindingKind::SignatureMismatch: return "signature-mismatch";
        case DeclFindingKind::MissingEvent: return "missing-event";
        case DeclFindingKind::EventParamMismatch: return "event-param-mismatch";
        case DeclFindingKind::MissingIndexed: return "missing-indexed";
    }
    return "?";
}

}  // namespace sentinel
