#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "sentinel/errors.hpp"
#include "sentinel/llm_gateway.hpp"

using namespace sentinel;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<Message> simple_prompt(const std::string& user) {
    return {{"system", "persona"}, {"user", user}};
}

}  // namespace

TEST_CASE("sha256 matches the published digest of 'abc' and the empty string") {
    // reference digests from FIPS 180-4 example values
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("a") != sha256_hex("b"));
    CHECK(sha256_hex("abc").size() == 64);
}

TEST_CASE("mock script: ordered matching with first-match-wins and fallback") {
    std::string yaml = R"(script:
  - match: 'alpha'
    response: 'first'
  - match: 'alpha|beta'
    response: 'second'
fallback: 'none'
)";
    MockScript script = load_mock(yaml);
    REQUIRE(script.entries.size() == 2);
    CHECK(script.fallback == "none");

    MockGateway gw(script);
    CHECK(gw.complete(simple_prompt("contains alpha token")) == "first");
    CHECK(gw.complete(simple_prompt("only beta here")) == "second");
    CHECK(gw.complete(simple_prompt("gamma")) == "none");
}

TEST_CASE("mock matching sees the concatenated system and user text") {
    std::string yaml = R"(script:
  - match: 'persona\nhello'
    response: 'joined'
fallback: 'no'
)";
    MockGateway gw(load_mock(yaml));
    CHECK(gw.complete(simple_prompt("hello")) == "joined");
}

TEST_CASE("mock gateway is deterministic across repeated calls") {
    MockGateway gw(load_mock("script: []\nfallback: 'always this'\n"));
    for (int i = 0; i < 20; ++i)
        CHECK(gw.complete(simple_prompt("query " + std::to_string(i))) == "always this");
    CHECK(gw.request_count() == 20);
}

TEST_CASE("malformed mock scripts are rejected") {
    CHECK_THROWS_AS(load_mock("script: []\n"), ParseError);           // missing fallback
    CHECK_THROWS_AS(load_mock("fallback: 'x'\nextra: 1\n"), ParseError);  // unknown key
    CHECK_THROWS_AS(load_mock("script:\n  - response: 'r'\nfallback: 'f'\n"),
                    ParseError);  // entry without match
    CHECK_THROWS_AS(load_mock("[1, 2]"), ParseError);  // not a map
}

TEST_CASE("budget pre-flight rejects before any request is issued") {
    LlmConfig cfg;
    cfg.input_budget = 5;
    MockGateway gw(load_mock("script: []\nfallback: 'ok'\n"), cfg);
    CHECK_THROWS_AS(gw.complete(simple_prompt(std::string(400, 'x'))), BudgetExceeded);
    CHECK(gw.request_count() == 0);
    CHECK(gw.ledger().empty());
}

TEST_CASE("ledger records one entry per request with prompt hash and token counts") {
    MockGateway gw(load_mock("script: []\nfallback: 'four char out!!'\n"));
    auto msgs = simple_prompt("record me");
    gw.complete(msgs);
    auto entries = gw.ledger();
    REQUIRE(entries.size() == 1);
    const LedgerEntry& e = entries[0];
    CHECK(e.outcome == "ok");
    std::string concat = msgs[0].text + "\n" + msgs[1].text + "\n";
    CHECK(e.prompt_sha256 == sha256_hex(concat));
    CHECK(e.in_tokens == estimate_tokens(concat));
    CHECK(e.out_tokens == estimate_tokens("four char out!!"));
    CHECK(e.ms >= 0);

    gw.complete(simple_prompt("again"));
    CHECK(gw.ledger().size() == 2);
    CHECK(gw.request_count() == 2);
}

TEST_CASE("ledger file sink appends one JSON line per request") {
    std::string path = "/tmp/sentinel_test_ledger.jsonl";
    std::remove(path.c_str());
    MockGateway gw(load_mock("script: []\nfallback: 'ok'\n"));
    gw.set_ledger_path(path);
    gw.complete(simple_prompt("one"));
    gw.complete(simple_prompt("two"));
    std::istringstream lines(read_file(path));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        ++n;
        CHECK(line.find("\"prompt_sha256\"") != std::string::npos);
        CHECK(line.find("\"outcome\"") != std::string::npos);
    }
    CHECK(n == 2);
    std::remove(path.c_str());
}

namespace {

/// Gateway whose backend blocks until released, counting concurrent entries.
class BlockingGateway : public LlmGateway {
public:
    explicit BlockingGateway(LlmConfig cfg) : LlmGateway(std::move(cfg)) {}

    std::atomic<int> concurrent{0};
    std::atomic<int> peak{0};
    std::atomic<bool> release{false};

protected:
    std::string complete_impl(const std::vector<Message>&) override {
        int cur = ++concurrent;
        int prev = peak.load();
        while (cur > prev && !peak.compare_exchange_weak(prev, cur)) {}
        while (!release.load()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
        --concurrent;
        return "VERDICT: COMPLIANT";
    }
};

}  // namespace

TEST_CASE("the in-flight cap bounds backend concurrency") {
    LlmConfig cfg;
    cfg.max_in_flight = 2;
    BlockingGateway gw(cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i)
        threads.emplace_back([&gw] { gw.complete(simple_prompt("go")); });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    CHECK(gw.concurrent.load() <= 2);
    gw.release.store(true);
    for (auto& t : threads) t.join();
    CHECK(gw.peak.load() <= 2);
    CHECK(gw.request_count() == 6);
    CHECK(gw.ledger().size() == 6);
}

TEST_CASE("http gateway refuses to start without the API key environment variable") {
    unsetenv("ERC_SENTINEL_API_KEY");
    LlmConfig cfg;
    HttpGateway gw(cfg);
    // the key check precedes any network activity, so this fails fast offline
    CHECK_THROWS_AS(gw.complete(simple_prompt("hi")), AuthError);
    CHECK(gw.request_count() == 1);  // the attempt is still ledgered
    auto entries = gw.ledger();
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].outcome != "ok");
}

TEST_CASE("bundled mock scripts load cleanly") {
    for (const char* name :
         {"all_compliant.yaml", "figure1_flag_allowance.yaml", "three_bugs.yaml"}) {
        MockScript s =
            load_mock(read_file(std::string(SENTINEL_FIXTURES) + "/scripts/" + name));
        CHECK(!s.fallback.empty());
    }
}
