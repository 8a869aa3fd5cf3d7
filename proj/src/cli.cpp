#include "sentinel/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sentinel/audit.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/ingest.hpp"
#include "sentinel/llm_gateway.hpp"
#include "sentinel/rule_model.hpp"
#include "sentinel/solidity_model.hpp"

namespace sentinel {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::unique_ptr<LlmGateway> make_gateway(const std::string& mock_path, const LlmConfig& cfg) {
    if (!mock_path.empty())
        return std::make_unique<MockGateway>(load_mock(read_file(mock_path)), cfg);
    return std::make_unique<HttpGateway>(cfg);
}

std::string slug_from_path(const std::string& path) {
    std::string stem = std::filesystem::path(path).stem().string();
    for (auto& c : stem) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return stem;
}

int cmd_extract_rules(const std::string& doc_path, const std::string& out_path,
                      const std::string& mock_path, bool force, const LlmConfig& cfg) {
    if (!force && std::filesystem::exists(out_path)) {
        std::cerr << "error: " << out_path << " exists; pass --force to overwrite\n";
        return 2;
    }
    auto gateway = make_gateway(mock_path, cfg);
    ErcDocument doc = load_erc_document(slug_from_path(doc_path), read_file(doc_path));
    IngestResult result = build_ruleset(doc, *gateway);
    write_file(out_path, save_ruleset(result.ruleset));
    write_file(out_path + ".log", render_extraction_log(result));
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << out_path << " (" << result.ruleset.all_rules().size()
              << " draft rules, review pending)\n";
    return 0;
}

int cmd_validate(const std::string& rules_path, bool approve_all, bool yes) {
    ErcRuleSet set = load_ruleset(read_file(rules_path));
    if (approve_all) {
        if (!yes) {
            std::cerr << "error: --approve-all requires --yes to confirm\n";
            return 2;
        }
        for (auto& f : set.functions)
            for (auto& r : f.rules) r.review = Review::Approved;
        for (auto& e : set.events)
            for (auto& r : e.rules) r.review = Review::Approved;
        for (auto& r : set.contract_scope_rules) r.review = Review::Approved;
        write_file(rules_path, save_ruleset(set));
    }
    auto issues = validate_ruleset(set);
    for (const auto& i : issues) std::cerr << i.rule_id << ": " << i.reason << "\n";
    if (issues.empty()) {
        std::cout << rules_path << ": " << set.all_rules().size() << " rules, no issues\n";
        return 0;
    }
    std::cerr << issues.size() << " issue(s)\n";
    return 1;
}

int cmd_slice(const std::string& contract_path, const std::string& fn_name, bool as_json) {
    ContractModel model = parse_contract(read_file(contract_path));
    int found = -1;
    bool name_exists = false;
    for (int i = 0; i < static_cast<int>(model.functions.size()); ++i) {
        const auto& fn = model.functions[i];
        if (fn.name != fn_name || fn.is_modifier || !fn.has_body) continue;
        name_exists = true;
        if (fn.visibility == Visibility::Public || fn.visibility == Visibility::External)
            found = i;
    }
    if (found < 0) {
        std::cerr << "error: " << fn_name
                  << (name_exists ? " is not a public function\n" : " not found\n");
        return 2;
    }
    CodeSlice slice = slice_public_function(model, found);
    const auto& fn = model.functions[found];
    const std::string contract = model.contracts[fn.contract_index].name;
    if (as_json) {
        nlohmann::ordered_json j;
        j["contract"] = contract;
        j["function"] = fn.name;
        j["lines"] = nlohmann::ordered_json::array();
        for (const auto& [line, reason] : slice.reasons)
            j["lines"].push_back({{"line", line},
                                  {"reason", to_string(reason)},
                                  {"text", model.source_lines[line - 1]}});
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "// slice: " << contract << "." << fn.name << " (" << slice.reasons.size()
                  << " lines)\n";
        for (const auto& [line, reason] : slice.reasons)
            std::cout << line << "|" << model.source_lines[line - 1] << "\n";
    }
    return 0;
}

int cmd_audit(const std::string& contract_path, const std::string& rules_path,
              const std::string& mock_path, const std::string& format,
              const std::string& out_path, const LlmConfig& cfg) {
    ErcRuleSet rules = load_ruleset(read_file(rules_path));
    auto gateway = make_gateway(mock_path, cfg);
    AuditReport report =
        audit_contract(read_file(contract_path), contract_path, rules, *gateway);
    std::string rendered =
        render_report(report, format == "json" ? ReportFormat::Json : ReportFormat::Text);
    if (out_path.empty())
        std::cout << rendered;
    else
        write_file(out_path, rendered);
    return report.findings.empty() ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"erc-sentinel: ERC compliance auditor for Solidity contracts"};
    app.require_subcommand(1);

    LlmConfig cfg;
    app.add_option("--model", cfg.model, "chat model identifier");
    app.add_option("--endpoint", cfg.endpoint, "chat-completion endpoint URL");
    app.add_option("--budget", cfg.input_budget, "input token budget per prompt");

    std::string doc_path, out_path, mock_path;
    bool force = false;
    auto* extract = app.add_subcommand("extract-rules", "draft a rule file from an ERC document");
    extract->add_option("erc", doc_path, "ERC document (markdown/plain text)")->required();
    extract->add_option("-o,--out", out_path, "output rule file")->required();
    extract->add_option("--mock", mock_path, "mock script instead of a live model");
    extract->add_flag("--force", force, "overwrite an existing output file");

    std::string rules_path;
    bool approve_all = false, yes = false;
    auto* validate = app.add_subcommand("validate", "review a rule file");
    validate->add_option("rules", rules_path, "rule file")->required();
    validate->add_flag("--approve-all", approve_all, "mark every rule approved");
    validate->add_flag("--yes", yes, "confirm --approve-all");

    std::string contract_path, fn_name;
    bool as_json = false;
    auto* slice = app.add_subcommand("slice", "print one public function's code slice");
    slice->add_option("contract", contract_path, "Solidity file")->required();
    slice->add_option("function", fn_name, "public function name")->required();
    slice->add_flag("--json", as_json, "emit line/reason pairs as JSON");

    std::string audit_contract_path, audit_rules_path, audit_mock, audit_out;
    std::string format = "text";
    auto* audit = app.add_subcommand("audit", "audit a contract against a rule file");
    audit->add_option("contract", audit_contract_path, "Solidity file")->required();
    audit->add_option("--rules", audit_rules_path, "approved rule file")->required();
    audit->add_option("--mock", audit_mock, "mock script instead of a live model");
    audit->add_option("--format", format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));
    audit->add_option("--out", audit_out, "write the report to a file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (extract->parsed())
            return cmd_extract_rules(doc_path, out_path, mock_path, force, cfg);
        if (validate->parsed()) return cmd_validate(rules_path, approve_all, yes);
        if (slice->parsed()) return cmd_slice(contract_path, fn_name, as_json);
        if (audit->parsed())
            return cmd_audit(audit_contract_path, audit_rules_path, audit_mock, format,
                             audit_out, cfg);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 2;
}

}  // namespace sentinel
