#include "sentinel/llm_gateway.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sentinel/errors.hpp"

namespace sentinel {

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

LlmGateway::LlmGateway(LlmConfig config) : config_(std::move(config)) {}

std::string LlmGateway::complete(const std::vector<Message>& messages) {
    int estimate = 0;
    std::string concatenated;
    for (const auto& m : messages) {
        estimate += estimate_tokens(m.text);
        concatenated += m.text;
        concatenated += '\n';
    }
    if (estimate > config_.input_budget)
        throw BudgetExceeded(estimate, config_.input_budget);

    {
        std::unique_lock lock(mutex_);
        slot_available_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
        ++in_flight_;
    }
    request_count_++;

    LedgerEntry entry;
    entry.prompt_sha256 = sha256_hex(concatenated);
    entry.in_tokens = estimate;
    auto start = std::chrono::steady_clock::now();
    std::string response;
    try {
        response = complete_impl(messages);
        entry.outcome = "ok";
        entry.out_tokens = estimate_tokens(response);
    } catch (...) {
        entry.outcome = "error";
        std::lock_guard lock(mutex_);
        --in_flight_;
        slot_available_.notify_one();
        ledger_.push_back(entry);
        throw;
    }
    entry.ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start)
                   .count();
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
        slot_available_.notify_one();
        ledger_.push_back(entry);
        if (ledger_path_) {
            nlohmann::json j{{"prompt_sha256", entry.prompt_sha256},
                             {"in_tokens", entry.in_tokens},
                             {"out_tokens", entry.out_tokens},
                             {"ms", entry.ms},
                             {"outcome", entry.outcome}};
            std::ofstream out(*ledger_path_, std::ios::app);
            out << j.dump() << '\n';
        }
    }
    return response;
}

std::vector<LedgerEntry> LlmGateway::ledger() const {
    std::lock_guard lock(mutex_);
    return ledger_;
}

MockScript load_mock(const std::string& script_file_text) {
    YAML::Node root;
    try {
        root = YAML::Load(script_file_text);
    } catch (const YAML::ParserException& ex) {
        throw ParseError(ex.mark.line + 1, ex.msg);
    }
    if (!root.IsMap()) throw ParseError(1, "mock script must be a YAML map");
    MockScript script;
    bool has_fallback = false;
    for (const auto& kv : root) {
        const std::string key = kv.first.as<std::string>();
        if (key == "fallback") {
            script.fallback = kv.second.as<std::string>();
            has_fallback = true;
        } else if (key == "script") {
            if (!kv.second.IsSequence())
                throw ParseError(kv.second.Mark().line + 1, "'script' must be a sequence");
            for (const auto& item : kv.second) {
                if (!item["match"] || !item["response"])
                    throw ParseError(item.Mark().line + 1,
                                     "script entry needs 'match' and 'response'");
                script.entries.push_back({item["match"].as<std::string>(),
                                          item["response"].as<std::string>()});
            }
        } else {
            throw ParseError(kv.first.Mark().line + 1,
                             "unknown key '" + key + "' in mock script");
        }
    }
    if (!has_fallback) throw ParseError(1, "mock script needs a 'fallback' response");
    return script;
}

MockGateway::MockGateway(MockScript script, LlmConfig config)
    : LlmGateway(std::move(config)), script_(std::move(script)) {
    for (const auto& e : script_.entries)
        compiled_.emplace_back(e.pattern, std::regex::ECMAScript);
}

std::string MockGateway::complete_impl(const std::vector<Message>& messages) {
    std::string text;
    for (const auto& m : messages) {
        text += m.text;
        text += '\n';
    }
    for (size_t i = 0; i < compiled_.size(); ++i)
        if (std::regex_search(text, compiled_[i])) return script_.entries[i].response;
    return script_.fallback;
}

HttpGateway::HttpGateway(LlmConfig config) : LlmGateway(std::move(config)) {}

std::string HttpGateway::complete_impl(const std::vector<Message>& messages) {
    const char* key = std::getenv(config().api_key_env.c_str());
    if (!key || !*key)
        throw AuthError("environment variable " + config().api_key_env + " is not set");

    // split endpoint into origin + path
    std::string endpoint = config().endpoint;
    size_t scheme_end = endpoint.find("://");
    size_t path_start = scheme_end == std::string::npos
                            ? endpoint.find('/')
                            : endpoint.find('/', scheme_end + 3);
    std::string origin = path_start == std::string::npos ? endpoint
                                                         : endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

    nlohmann::json body;
    body["model"] = config().model;
    body["temperature"] = config().temperature;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", m.role}, {"content", m.text}});

    std::string last_error;
    for (int attempt = 0; attempt < config().retry_max_attempts; ++attempt) {
        if (attempt > 0) {
            double delay = config().retry_backoff_base_s * (1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client client(origin);
        client.set_read_timeout(120, 0);
        httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthError("provider rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& ex) {
            throw TransportError(std::string("malformed provider response: ") + ex.what());
        }
    }
    throw TransportError("request failed after " + std::to_string(config().retry_max_attempts) +
                         " attempts: " + last_error);
}

}  // namespace sentinel
