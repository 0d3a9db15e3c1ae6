#pragma once

// Chat-completion clients: the HTTP wire client with retry and rate
// limiting, transcript recording, and hermetic replay.

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlsynth/serialize.hpp"

namespace xlsynth {

enum class Role { System, User, Assistant };

std::string_view role_name(Role r);
Role role_from_name(std::string_view s);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 2048;

    // Throws std::invalid_argument when empty or temperature is outside [0, 2].
    void validate() const;
};

ChatRequest single_turn(std::string model_id, std::string prompt, double temperature);

Json chat_request_to_json(const ChatRequest& r);
ChatRequest chat_request_from_json(const Json& j);

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class RateLimitedExhausted : public TransportError {
public:
    using TransportError::TransportError;
};
class BadResponseShape : public TransportError {
public:
    using TransportError::TransportError;
};
// Authentication rejected or missing; pipelines abort on this one.
class CredentialError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Returns the first choice's content.
    virtual std::string chat(const ChatRequest& req) = 0;
};

class Clock {
public:
    using time_point = std::chrono::steady_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
    virtual void sleep_for(std::chrono::milliseconds d) = 0;
};

class SystemClock : public Clock {
public:
    time_point now() override { return std::chrono::steady_clock::now(); }
    void sleep_for(std::chrono::milliseconds d) override;
};

// Time only moves when someone sleeps.
class VirtualClock : public Clock {
public:
    time_point now() override;
    void sleep_for(std::chrono::milliseconds d) override;
    std::chrono::milliseconds slept() const;

private:
    mutable std::mutex mu_;
    time_point t_{};
    std::chrono::milliseconds slept_{0};
};

// Sliding 60 s window; 0 requests per minute disables limiting.
class RateLimiter {
public:
    RateLimiter(std::size_t requests_per_minute, std::shared_ptr<Clock> clock);

    void acquire();
    std::vector<Clock::time_point> grants() const;

private:
    std::size_t rpm_;
    std::shared_ptr<Clock> clock_;
    mutable std::mutex mu_;
    std::deque<Clock::time_point> window_;
    std::vector<Clock::time_point> grants_;
};

struct HttpClientOptions {
    std::string endpoint;  // base URL; "/v1/chat/completions" is appended unless present
    std::string api_key;
    int max_retries = 5;
    std::chrono::milliseconds base_backoff{500};
    std::chrono::milliseconds max_backoff{30000};
    std::size_t requests_per_minute = 0;
    std::chrono::seconds timeout{120};
};

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(HttpClientOptions opts, std::shared_ptr<Clock> clock = std::make_shared<SystemClock>());

    std::string chat(const ChatRequest& req) override;
    std::size_t retry_count() const { return retries_.load(); }

private:
    HttpClientOptions opts_;
    std::shared_ptr<Clock> clock_;
    RateLimiter limiter_;
    std::string base_;
    std::string path_;
    std::atomic<std::size_t> retries_{0};
};

// Extracts choices[0].message.content from a completions response body.
std::string parse_completion_body(const std::string& body);

// Appends {"req", "resp", "ts"} lines for every successful call.
class TranscriptLogger : public ChatClient {
public:
    TranscriptLogger(std::shared_ptr<ChatClient> inner, std::filesystem::path path);
    std::string chat(const ChatRequest& req) override;

private:
    std::shared_ptr<ChatClient> inner_;
    std::filesystem::path path_;
    std::mutex mu_;
};

// Serves recorded responses keyed by the full request. Repeated
// identical requests consume recorded responses in order; the last one
// is reused once exhausted. Unknown requests throw TransportError.
class ReplayChatClient : public ChatClient {
public:
    explicit ReplayChatClient(const std::filesystem::path& transcripts);  // file or directory of *.jsonl
    std::string chat(const ChatRequest& req) override;
    std::size_t size() const { return entries_.size(); }
    std::size_t misses() const { return misses_.load(); }

private:
    struct Entry {
        std::vector<std::string> responses;
        std::size_t next = 0;
    };
    std::map<std::string, Entry> entries_;
    std::mutex mu_;
    std::atomic<std::size_t> misses_{0};
};

std::string request_key(const ChatRequest& req);

// Adapts a callable; used for canned teachers and students.
class CallbackChatClient : public ChatClient {
public:
    using Fn = std::function<std::string(const ChatRequest&)>;
    explicit CallbackChatClient(Fn fn) : fn_(std::move(fn)) {}
    std::string chat(const ChatRequest& req) override { return fn_(req); }

private:
    Fn fn_;
};

}  // namespace xlsynth
