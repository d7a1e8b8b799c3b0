#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sdohkit/digest.hpp"
#include "sdohkit/error.hpp"
#include "sdohkit/io.hpp"
#include "sdohkit/rng.hpp"

namespace sdohkit::llm {

struct ChatExchange {
    std::string rendered_prompt;
    std::string model_id;
    std::string response_text;
    double latency_ms = 0.0;
    int attempt_count = 1;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string source_text_hash;
};

inline void normalize_embedding(std::vector<double>& v) {
    double ss = 0.0;
    for (const double x : v) ss += x * x;
    if (ss <= 0.0) return;  // all-zero input stays zero
    const double inv = 1.0 / std::sqrt(ss);
    for (double& x : v) x *= inv;
}

inline double cosine_of_unit(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
    return dot;
}

// Append-only JSON-lines sink for chat exchanges; writes are serialized.
// One log represents one stage run, so opening truncates any previous file.
class ExchangeLog {
public:
    explicit ExchangeLog(const fs::path& path) : path_(path) {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) throw Error(ErrorKind::Io, "cannot open exchange log " + path.string());
    }

    void append(const ChatExchange& ex) {
        nlohmann::json j = {{"prompt_sha256", sha256_hex(ex.rendered_prompt)},
                            {"model_id", ex.model_id},
                            {"response_text", ex.response_text},
                            {"latency_ms", ex.latency_ms},
                            {"attempt_count", ex.attempt_count},
                            {"rendered_prompt", ex.rendered_prompt}};
        const std::string line = j.dump() + "\n";
        std::lock_guard<std::mutex> lock(mu_);
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        out_.flush();
    }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::ofstream out_;
    std::mutex mu_;
};

// Counting semaphore bounding in-flight backend requests.
class ParallelGate {
public:
    explicit ParallelGate(int max_parallel) : available_(max_parallel < 1 ? 1 : max_parallel) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct GateGuard {
    explicit GateGuard(ParallelGate& g) : gate(g) { gate.acquire(); }
    ~GateGuard() { gate.release(); }
    ParallelGate& gate;
};

// Shared limiter: at most `per_second` request starts per second (0 = off).
class RateLimiter {
public:
    explicit RateLimiter(double per_second) : min_interval_(per_second > 0 ? 1.0 / per_second : 0.0) {}

    void acquire() {
        if (min_interval_ <= 0.0) return;
        std::unique_lock<std::mutex> lock(mu_);
        const auto now = std::chrono::steady_clock::now();
        const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(min_interval_));
        if (next_slot_ < now) next_slot_ = now;
        const auto my_slot = next_slot_;
        next_slot_ += interval;
        lock.unlock();
        std::this_thread::sleep_until(my_slot);
    }

private:
    double min_interval_;
    std::mutex mu_;
    std::chrono::steady_clock::time_point next_slot_{};
};

// Backend interface. chat/embed implementations go through the template
// methods so every exchange hits the shared log exactly once.
class Backend {
public:
    virtual ~Backend() = default;

    ChatExchange chat(const std::string& rendered_prompt) {
        ChatExchange ex = do_chat(rendered_prompt);
        if (log_ != nullptr) log_->append(ex);
        return ex;
    }

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) {
        if (texts.empty()) throw Error(ErrorKind::EmptyInput, "embed: no texts");
        for (const auto& t : texts)
            if (t.empty()) throw Error(ErrorKind::Input, "embed: empty text");
        return do_embed(texts);
    }

    void set_exchange_log(ExchangeLog* log) { log_ = log; }
    virtual std::string model_id() const = 0;

protected:
    virtual ChatExchange do_chat(const std::string& rendered_prompt) = 0;
    virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) = 0;

private:
    ExchangeLog* log_ = nullptr;
};

// ---------------------------------------------------------------------------
// Live OpenAI-compatible HTTP backend
// ---------------------------------------------------------------------------

struct LiveConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string chat_model_id = "gpt-4o";
    std::string embedding_model_id = "text-embedding-3-large";
    double temperature = 0.0;
    int max_parallel = 4;
    int retry_cap = 5;  // total attempts, not re-tries
    int timeout_ms = 60000;
    int backoff_base_ms = 200;
    double rate_per_second = 0.0;

    std::string api_key() const {
        const char* v = std::getenv(api_key_env.c_str());
        return v == nullptr ? std::string() : std::string(v);
    }
};

}  // namespace sdohkit::llm

#include <httplib.h>

// glibc's <resolv.h> (pulled in by httplib on Linux) leaves a `_res` macro
// behind that mangles Eigen parameter names in any TU including both.
#ifdef _res
#undef _res
#endif

namespace sdohkit::llm {

class LiveBackend : public Backend {
public:
    explicit LiveBackend(LiveConfig config)
        : config_(std::move(config)),
          gate_(config_.max_parallel),
          limiter_(config_.rate_per_second) {
        const auto scheme_end = config_.base_url.find("://");
        const auto path_start = scheme_end == std::string::npos
                                    ? config_.base_url.find('/')
                                    : config_.base_url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            origin_ = config_.base_url;
            path_prefix_.clear();
        } else {
            origin_ = config_.base_url.substr(0, path_start);
            path_prefix_ = config_.base_url.substr(path_start);
        }
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }

    std::string model_id() const override { return config_.chat_model_id; }

protected:
    ChatExchange do_chat(const std::string& rendered_prompt) override {
        nlohmann::json body = {
            {"model", config_.chat_model_id},
            {"temperature", config_.temperature},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", rendered_prompt}}})}};

        ChatExchange ex;
        ex.rendered_prompt = rendered_prompt;
        ex.model_id = config_.chat_model_id;

        const auto t0 = std::chrono::steady_clock::now();
        const nlohmann::json reply =
            post_with_retries("/chat/completions", body, ex.attempt_count);
        ex.latency_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();

        try {
            ex.response_text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Backend,
                        std::string("malformed chat completion response: ") + e.what());
        }
        return ex;
    }

    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override {
        nlohmann::json body = {{"model", config_.embedding_model_id}, {"input", texts}};
        int attempts = 0;
        const nlohmann::json reply = post_with_retries("/embeddings", body, attempts);

        std::vector<EmbeddingVector> out(texts.size());
        try {
            for (const auto& item : reply.at("data")) {
                const auto index = item.at("index").get<std::size_t>();
                if (index >= out.size())
                    throw Error(ErrorKind::Backend, "embedding index out of range");
                EmbeddingVector v;
                v.values = item.at("embedding").get<std::vector<double>>();
                v.source_text_hash = sha256_hex(texts[index]);
                normalize_embedding(v.values);
                out[index] = std::move(v);
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Backend,
                        std::string("malformed embeddings response: ") + e.what());
        }
        for (std::size_t i = 0; i < out.size(); ++i)
            if (out[i].values.empty())
                throw Error(ErrorKind::Backend, "embeddings response missing index " +
                                                    std::to_string(i));
        return out;
    }

private:
    static bool retryable_status(int status) {
        return status == 429 || (status >= 500 && status < 600);
    }

    nlohmann::json post_with_retries(const std::string& endpoint, const nlohmann::json& body,
                                     int& attempts_out) {
        GateGuard guard(gate_);
        const std::string payload = body.dump();
        const std::string path = path_prefix_ + endpoint;
        std::string last_failure = "no attempt made";

        const int cap = config_.retry_cap < 1 ? 1 : config_.retry_cap;
        for (int attempt = 1; attempt <= cap; ++attempt) {
            attempts_out = attempt;
            limiter_.acquire();

            httplib::Client client(origin_);
            client.set_connection_timeout(config_.timeout_ms / 1000,
                                          (config_.timeout_ms % 1000) * 1000);
            client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
            httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key()}};

            auto res = client.Post(path, headers, payload, "application/json");
            if (res) {
                if (res->status >= 200 && res->status < 300) {
                    try {
                        return nlohmann::json::parse(res->body);
                    } catch (const nlohmann::json::exception& e) {
                        throw Error(ErrorKind::Backend,
                                    std::string("response is not JSON: ") + e.what());
                    }
                }
                if (!retryable_status(res->status))
                    throw Error(ErrorKind::Backend,
                                "HTTP " + std::to_string(res->status) + " from " + endpoint);
                last_failure = "HTTP " + std::to_string(res->status);
            } else {
                last_failure = "transport: " + httplib::to_string(res.error());
            }

            if (attempt < cap) {
                const std::uint64_t h =
                    mix64(digest_u64(payload) ^ static_cast<std::uint64_t>(attempt));
                const int base = config_.backoff_base_ms;
                const int delay = base * (1 << std::min(attempt - 1, 10)) +
                                  static_cast<int>(h % static_cast<std::uint64_t>(base + 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            }
        }
        throw Error(ErrorKind::Transport, "retries exhausted for " + endpoint + " (last: " +
                                              last_failure + ")");
    }

    LiveConfig config_;
    std::string origin_;
    std::string path_prefix_;
    ParallelGate gate_;
    RateLimiter limiter_;
};

}  // namespace sdohkit::llm
