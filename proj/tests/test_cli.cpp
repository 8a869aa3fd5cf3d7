#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sentinel/cli.hpp"
#include "sentinel/rule_model.hpp"

using namespace sentinel;
namespace fs = std::filesystem;

namespace {

std::string fixture_path(const std::string& name) {
    return std::string(SENTINEL_FIXTURES) + "/" + name;
}

std::string data_path(const std::string& name) {
    return std::string(SENTINEL_DATA) + "/" + name;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "erc-sentinel");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());

    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    CliResult result;
    try {
        result.exit_code = run_cli(static_cast<int>(argv.size()), argv.data());
    } catch (...) {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
        throw;
    }
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    result.out = out.str();
    result.err = err.str();
    return result;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("sentinel_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

}  // namespace

TEST_CASE("slice: dump format, line count, and exit code") {
    CliResult r = run({"slice", fixture_path("figure1.sol"), "transferFrom"});
    CHECK(r.exit_code == 0);
    CHECK(r.err.empty());
    std::istringstream lines(r.out);
    std::string first;
    std::getline(lines, first);
    CHECK(first == "// slice: SimpleToken.transferFrom (26 lines)");
    int body_lines = 0;
    std::string line;
    while (std::getline(lines, line)) {
        ++body_lines;
        size_t bar = line.find('|');
        REQUIRE(bar != std::string::npos);
        CHECK(std::stoi(line.substr(0, bar)) > 0);
    }
    CHECK(body_lines == 26);
}

TEST_CASE("slice: json output carries line, reason, and text per entry") {
    CliResult r = run({"slice", fixture_path("figure1.sol"), "transferFrom", "--json"});
    CHECK(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["contract"] == "SimpleToken");
    CHECK(j["function"] == "transferFrom");
    REQUIRE(j["lines"].size() == 26);
    for (const auto& entry : j["lines"]) {
        CHECK(entry.contains("line"));
        CHECK(entry.contains("reason"));
        CHECK(entry.contains("text"));
    }
}

TEST_CASE("slice: unknown and non-public functions are operational errors") {
    CliResult missing = run({"slice", fixture_path("figure1.sol"), "nonexistent"});
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("not found") != std::string::npos);

    CliResult internal = run({"slice", fixture_path("figure1.sol"), "_transfer"});
    CHECK(internal.exit_code == 2);
    CHECK(internal.err.find("not a public function") != std::string::npos);
}

TEST_CASE("audit: findings set the exit code and the text report") {
    CliResult r = run({"audit", fixture_path("threebug.sol"), "--rules",
                       data_path("rules/erc20.yaml"), "--mock",
                       fixture_path("scripts/three_bugs.yaml")});
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("summary: high=1 medium=1 low=1") != std::string::npos);
    CHECK(r.out.find("erc20.transferFrom.authorized") != std::string::npos);
}

TEST_CASE("audit: a clean contract exits zero") {
    CliResult r = run({"audit", fixture_path("erc20_complete.sol"), "--rules",
                       data_path("rules/erc20.yaml"), "--mock",
                       fixture_path("scripts/all_compliant.yaml")});
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("summary: high=0 medium=0 low=0") != std::string::npos);
}

TEST_CASE("audit: json format written to a file") {
    TempDir tmp;
    std::string out_file = tmp.file("report.json");
    CliResult r = run({"audit", fixture_path("figure1.sol"), "--rules",
                       data_path("rules/erc20.yaml"), "--mock",
                       fixture_path("scripts/figure1_flag_allowance.yaml"), "--format", "json",
                       "--out", out_file});
    CHECK(r.exit_code == 1);
    CHECK(r.out.empty());  // report went to the file
    auto j = nlohmann::json::parse(read_file(out_file));
    CHECK(j["schema"] == "erc-sentinel/report/v1");
    CHECK(j["summary"]["high"] == 1);
    CHECK(j["summary"]["medium"] == 7);
}

TEST_CASE("audit: unreadable inputs and bad flags are operational errors") {
    CliResult nofile = run({"audit", "/nonexistent/contract.sol", "--rules",
                            data_path("rules/erc20.yaml"), "--mock",
                            fixture_path("scripts/all_compliant.yaml")});
    CHECK(nofile.exit_code == 2);
    CHECK(nofile.err.find("error:") != std::string::npos);

    CliResult badfmt = run({"audit", fixture_path("figure1.sol"), "--rules",
                            data_path("rules/erc20.yaml"), "--format", "xml"});
    CHECK(badfmt.exit_code == 2);
}

TEST_CASE("audit: without a mock script the live gateway demands the API key") {
    unsetenv("ERC_SENTINEL_API_KEY");
    CliResult r = run({"audit", fixture_path("erc20_complete.sol"), "--rules",
                       data_path("rules/erc20.yaml")});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("ERC_SENTINEL_API_KEY") != std::string::npos);
}

TEST_CASE("validate: the bundled rule files pass cleanly") {
    for (const char* name :
         {"rules/erc20.yaml", "rules/erc721.yaml", "rules/erc1155.yaml", "rules/erc3525.yaml"}) {
        CliResult r = run({"validate", data_path(name)});
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("no issues") != std::string::npos);
    }
}

TEST_CASE("extract, validate, approve: the draft lifecycle end to end") {
    TempDir tmp;
    std::string rules_file = tmp.file("mini.yaml");

    CliResult extract = run({"extract-rules", fixture_path("mini_erc.md"), "-o", rules_file,
                             "--mock", fixture_path("scripts/mini_ingest.yaml")});
    CHECK(extract.exit_code == 0);
    CHECK(extract.out.find("5 draft rules") != std::string::npos);
    CHECK(fs::exists(rules_file));
    CHECK(fs::exists(rules_file + ".log"));

    // a second run refuses to overwrite without --force
    CliResult refuse = run({"extract-rules", fixture_path("mini_erc.md"), "-o", rules_file,
                            "--mock", fixture_path("scripts/mini_ingest.yaml")});
    CHECK(refuse.exit_code == 2);
    CHECK(refuse.err.find("--force") != std::string::npos);
    CliResult forced = run({"extract-rules", fixture_path("mini_erc.md"), "-o", rules_file,
                            "--force", "--mock", fixture_path("scripts/mini_ingest.yaml")});
    CHECK(forced.exit_code == 0);

    // drafts are pending, so validation reports issues
    CliResult pending = run({"validate", rules_file});
    CHECK(pending.exit_code == 1);
    CHECK(pending.err.find("pending human review") != std::string::npos);

    // bulk approval needs explicit confirmation
    CliResult unconfirmed = run({"validate", rules_file, "--approve-all"});
    CHECK(unconfirmed.exit_code == 2);
    CHECK(unconfirmed.err.find("--yes") != std::string::npos);
    CHECK(run({"validate", rules_file}).exit_code == 1);  // file unchanged

    CliResult approved = run({"validate", rules_file, "--approve-all", "--yes"});
    CHECK(approved.exit_code == 0);
    CHECK(approved.out.find("5 rules, no issues") != std::string::npos);
    std::string after_first = read_file(rules_file);
    // approval is idempotent
    CHECK(run({"validate", rules_file, "--approve-all", "--yes"}).exit_code == 0);
    CHECK(read_file(rules_file) == after_first);
    CHECK(run({"validate", rules_file}).exit_code == 0);

    // the approved draft set can drive an audit
    CliResult audit = run({"audit", fixture_path("erc20_complete.sol"), "--rules", rules_file,
                           "--mock", fixture_path("scripts/all_compliant.yaml")});
    CHECK(audit.exit_code == 0);
}

TEST_CASE("auditing with an unapproved rule file is an operational error") {
    TempDir tmp;
    std::string rules_file = tmp.file("draft.yaml");
    run({"extract-rules", fixture_path("mini_erc.md"), "-o", rules_file, "--mock",
         fixture_path("scripts/mini_ingest.yaml")});
    CliResult r = run({"audit", fixture_path("erc20_complete.sol"), "--rules", rules_file,
                       "--mock", fixture_path("scripts/all_compliant.yaml")});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("not approved") != std::string::npos);
}

TEST_CASE("usage errors: missing subcommand or arguments") {
    CHECK(run({}).exit_code == 2);
    CHECK(run({"frobnicate"}).exit_code == 2);
    CHECK(run({"slice", fixture_path("figure1.sol")}).exit_code == 2);  // missing function
    CHECK(run({"audit", fixture_path("figure1.sol")}).exit_code == 2);  // missing --rules
}
