#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sentinel/errors.hpp"
#include "sentinel/rule_model.hpp"

namespace sentinel {

/// 1-based inclusive line range.
struct SourceSpan {
    int first = 0;
    int last = 0;
    bool contains(int line) const { return line >= first && line <= last; }
    bool operator==(const SourceSpan&) const = default;
};

enum class ContractKind { Contract, Interface, Library, Abstract };
enum class Visibility { Public, External, Internal, Private };

struct ContractDecl {
    std::string name;
    ContractKind kind = ContractKind::Contract;
    std::vector<std::string> parents;
    SourceSpan header;   // declaration up to the opening brace
    int closing_brace = 0;
};

struct SolParam {
    std::string type;
    std::string name;
};

struct FunctionDef {
    std::string name;
    int contract_index = -1;
    Visibility visibility = Visibility::Public;
    std::vector<SolParam> params;
    std::vector<std::string> returns;
    std::vector<std::string> modifiers;  // modifier invocations on the signature
    SourceSpan body;                     // full definition incl. signature
    std::optional<SourceSpan> leading_comment;
    std::string state_mutability;        // view / pure / payable / ""
    bool is_modifier = false;
    bool has_body = true;                // false for `function f(...) ... ;`
};

struct FieldDef {
    std::string name;
    std::string type;
    Visibility visibility = Visibility::Internal;
    int decl_line = 0;
    int contract_index = -1;
};

struct SolEventParam {
    std::string type;
    std::string name;
    bool indexed = false;
};

struct EventDef {
    std::string name;
    std::vector<SolEventParam> params;
    int decl_line = 0;
    int contract_index = -1;
};

struct ContractModel {
    std::vector<std::string> source_lines;
    std::vector<ContractDecl> contracts;
    std::vector<FunctionDef> functions;
    std::vector<FieldDef> fields;
    std::vector<EventDef> events;
    std::optional<std::string> pragma_version;
    mutable std::vector<std::string> warnings;
    std::vector<bool> comment_only;  // per line (1-based index, slot 0 unused)
    // using-for directives, per contract index: library names in scope
    std::multimap<int, std::string> using_libraries;

    const FunctionDef* find_function(int contract_index, const std::string& name) const;
    /// Contract indexes in resolution order for `contract_index` (self first,
    /// then parents, derived-most wins).
    std::vector<int> linearized_scope(int contract_index) const;
    /// The most-derived concrete contract, i.e. the audit target.
    int main_contract() const;
};

ContractModel parse_contract(const std::string& source);

/// Same-file callees of `fn`, resolved by name + arity. Modifier invocations
/// count as callees. Indexes into model.functions.
std::set<int> direct_callees(const ContractModel& model, int fn_index);

struct RelatedCode {
    std::set<int> callees;  // transitive closure, excluding fn itself
    std::set<int> fields;
};

RelatedCode related_code(const ContractModel& model, int fn_index);

enum class SliceReason { AnchorFn, Callee, Field, ContractHeader, Comment, ClosingBrace };

std::string to_string(SliceReason r);

struct CodeSlice {
    int anchor = -1;  // index into model.functions
    std::map<int, SliceReason> reasons;  // line -> single inclusion reason
    std::string rendered;
    std::set<int> lines() const;
};

CodeSlice slice_public_function(const ContractModel& model, int fn_index);

struct SurfaceBinding {
    const FunctionSpec* spec = nullptr;
    std::optional<int> fn_index;     // bound definition, if any
    std::optional<int> field_index;  // bound via auto-generated getter
    bool ambiguous = false;
    std::vector<int> candidates;     // all tied candidates when ambiguous
};

/// Binds each rule-set function to its most-derived in-file implementation or
/// to a public state variable whose auto-generated getter satisfies it.
std::vector<SurfaceBinding> match_erc_surface(const ContractModel& model,
                                              const ErcRuleSet& rules);

enum class DeclFindingKind {
    MissingFunction,
    SignatureMismatch,
    MissingEvent,
    EventParamMismatch,
    MissingIndexed,
};

std::string to_string(DeclFindingKind k);

struct DeclFinding {
    std::string rule_id;
    DeclFindingKind kind;
    std::string detail;
    std::optional<int> location;
};

/// Static check of every DECL rule; no LLM involvement.
std::vector<DeclFinding> check_declarations(const ContractModel& model,
                                            const ErcRuleSet& rules);

/// "uint" -> "uint256" etc.; strips data-location keywords.
std::string normalize_type(const std::string& type);

}  // namespace sentinel
