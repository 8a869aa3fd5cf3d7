#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "sentinel/prompt_engine.hpp"

namespace sentinel {

struct LlmConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4-turbo";
    double temperature = 0.0;
    int max_in_flight = 4;
    int input_budget = 16000;
    int retry_max_attempts = 3;
    double retry_backoff_base_s = 1.0;
    std::string api_key_env = "ERC_SENTINEL_API_KEY";
};

struct LedgerEntry {
    std::string prompt_sha256;
    int in_tokens = 0;
    int out_tokens = 0;
    long long ms = 0;
    std::string outcome;  // "ok" or an error tag
};

std::string sha256_hex(const std::string& data);

/// Provider-agnostic chat-completion access. The base class enforces the
/// pre-flight budget check and the in-flight cap; adapters implement the wire.
class LlmGateway {
public:
    explicit LlmGateway(LlmConfig config);
    virtual ~LlmGateway() = default;

    /// Throws BudgetExceeded before any request leaves the process.
    std::string complete(const std::vector<Message>& messages);

    const LlmConfig& config() const { return config_; }
    int request_count() const { return request_count_.load(); }
    std::vector<LedgerEntry> ledger() const;
    /// Optional JSONL run ledger, one object per request.
    void set_ledger_path(const std::string& path) { ledger_path_ = path; }

protected:
    virtual std::string complete_impl(const std::vector<Message>& messages) = 0;

private:
    LlmConfig config_;
    std::atomic<int> request_count_{0};
    mutable std::mutex mutex_;
    std::condition_variable slot_available_;
    int in_flight_ = 0;
    std::vector<LedgerEntry> ledger_;
    std::optional<std::string> ledger_path_;
};

struct MockScriptEntry {
    std::string pattern;
    std::string response;
};

struct MockScript {
    std::vector<MockScriptEntry> entries;  // tested in order, first match wins
    std::string fallback;
};

/// Parses the YAML mock script format. Throws ParseError.
MockScript load_mock(const std::string& script_file_text);

/// Deterministic scripted stand-in for the LLM.
class MockGateway : public LlmGateway {
public:
    MockGateway(MockScript script, LlmConfig config = {});

protected:
    std::string complete_impl(const std::vector<Message>& messages) override;

private:
    MockScript script_;
    std::vector<std::regex> compiled_;
};

/// Chat-completion HTTP adapter (OpenAI-compatible JSON shape).
class HttpGateway : public LlmGateway {
public:
    explicit HttpGateway(LlmConfig config);

protected:
    std::string complete_impl(const std::vector<Message>& messages) override;
};

}  // namespace sentinel
