#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sentinel/llm_gateway.hpp"
#include "sentinel/rule_model.hpp"

namespace sentinel {

struct ErcSection {
    std::string heading;
    int first_line = 1;  // 1-based, inclusive
    int last_line = 1;
};

/// An ERC standard document plus a lightweight heading index used for
/// budget-driven segmentation.
struct ErcDocument {
    std::string erc_id;
    std::string body;
    std::vector<ErcSection> sections;
};

/// Splits `body` into lines and scans markdown headings; the sections cover
/// the whole body without overlap.
ErcDocument load_erc_document(std::string erc_id, std::string body);

struct ExtractLogEntry {
    std::string target;  // "interface", function or event name
    std::string group;   // "functions", "events", "CP".."AP", "EP-event"
    int token_estimate = 0;
    std::string outcome;  // "ok", "retry-ok", "error: ..."
};

struct RejectedRule {
    std::string target;
    std::string reason;
    std::string raw;  // the offending YAML item, re-serialized
};

/// Step 1: enumerate the functions and events the ERC declares (two prompts).
std::pair<std::vector<FunctionSpec>, std::vector<EventSpec>> extract_interface(
    const ErcDocument& doc, LlmGateway& llm, std::vector<ExtractLogEntry>* log = nullptr);

/// Step 2: semantic rules for one function and one linguistic group.
std::vector<ErcRule> extract_rules_for_function(const ErcDocument& doc,
                                                const FunctionSpec& fn, RuleGroup group,
                                                LlmGateway& llm,
                                                std::vector<ExtractLogEntry>* log = nullptr,
                                                std::vector<RejectedRule>* rejected = nullptr);

/// Step 3: emission rules for one event.
std::vector<ErcRule> extract_event_rules(const ErcDocument& doc, const EventSpec& ev,
                                         LlmGateway& llm,
                                         std::vector<ExtractLogEntry>* log = nullptr,
                                         std::vector<RejectedRule>* rejected = nullptr);

struct IngestResult {
    ErcRuleSet ruleset;
    std::vector<ExtractLogEntry> log;
    std::vector<RejectedRule> rejected;
    std::vector<std::string> warnings;
};

/// Full startup-phase pipeline: interface, then per-function x per-group and
/// per-event extraction. Every emitted rule has review = pending; DECL rules
/// are derived from the extracted interface without further prompts.
IngestResult build_ruleset(const ErcDocument& doc, LlmGateway& llm);

/// Renders the sidecar extraction log, one line per prompt.
std::string render_extraction_log(const IngestResult& result);

}  // namespace sentinel
